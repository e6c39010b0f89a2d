#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use valleyfill::lp::{Bounds, LpProblem, Sense};
use valleyfill::milp::MilpProblem;

/// Random pure-binary problem with mixed row senses. Integer-valued data keep
/// the enumeration oracle exact.
pub fn random_binary_milp(rng: &mut ChaCha8Rng, n: usize) -> MilpProblem {
    let mut p = LpProblem::new();
    let vars: Vec<usize> = (0..n)
        .map(|_| p.add_var(Bounds::binary(), rng.gen_range(-10..=10) as f64))
        .collect();
    let rows = rng.gen_range(1..=4);
    for i in 0..rows {
        let mut coeffs = Vec::new();
        for &j in &vars {
            if rng.gen_bool(0.6) {
                coeffs.push((j, rng.gen_range(-5..=9) as f64));
            }
        }
        if coeffs.is_empty() {
            coeffs.push((vars[0], 1.0));
        }
        let total: f64 = coeffs.iter().map(|c| c.1.abs()).sum();
        let (sense, rhs) = match rng.gen_range(0..6) {
            0 => (Sense::Ge, (rng.gen_range(0.0..0.4) * total).round()),
            1 => (Sense::Eq, coeffs.iter().take(2).map(|c| c.1).sum::<f64>()),
            _ => (Sense::Le, (rng.gen_range(0.2..0.7) * total).round()),
        };
        p.add_row(format!("r{i}"), coeffs, sense, rhs);
    }
    MilpProblem::new(p, vars)
}

/// Exhaustive minimum over all 0/1 assignments.
pub fn enumerate_binary(m: &MilpProblem) -> Option<f64> {
    let n = m.base.num_vars;
    assert!(n <= 20);
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1u32 << n) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = ((mask >> j) & 1) as f64;
        }
        if m.base.max_violation(&x) <= 1e-9 {
            let z = m.base.objective_value(&x);
            best = Some(best.map_or(z, |b: f64| b.min(z)));
        }
    }
    best
}

use chrono::{DateTime, Weekday};
use valleyfill::instance::{Activity, Battery, Calendar, CalendarSpec, CostModel, Instance, Room};

pub const WEEKDAYS: [Weekday; 5] = [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri];

pub fn calendar(start: &str, horizon: usize, hours: (&str, &str), days: &[Weekday]) -> (CalendarSpec, Calendar) {
    let spec = CalendarSpec {
        start: DateTime::parse_from_rfc3339(start).unwrap(),
        horizon,
        office_hours: (hours.0.into(), hours.1.into()),
        office_days: days.to_vec(),
    };
    let cal = Calendar::from_spec(&spec).unwrap();
    (spec, cal)
}

pub fn activity(id: &str, duration: usize, load: f64, rooms: usize, size: u32) -> Activity {
    Activity {
        id: id.into(),
        duration,
        load_kw_per_room: load,
        rooms_required: rooms,
        room_size_min: size,
        precedence: vec![],
        recurring: true,
    }
}

pub fn battery(id: &str, capacity: f64, power: f64, soc: f64, block: usize) -> Battery {
    Battery {
        id: id.into(),
        capacity_kwh: capacity,
        power_kw: power,
        efficiency: 1.0,
        initial_soc_kwh: soc,
        decision_block: block,
    }
}

/// Building-like net demand: overnight floor, daytime hump, midday solar dip,
/// quieter weekends.
pub fn building_baseload(cal: &Calendar, scale: f64) -> Vec<f64> {
    (0..cal.horizon)
        .map(|t| {
            let slot = (t % 96) as f64;
            let day = std::f64::consts::TAU * slot / 96.0;
            let weekend = matches!(cal.day_list[t], Weekday::Sat | Weekday::Sun);
            let hump = (-(slot - 56.0).powi(2) / 300.0).exp() * if weekend { 0.3 } else { 1.0 };
            let solar = (-(slot - 50.0).powi(2) / 120.0).exp() * 0.35;
            let wiggle = 0.04 * (3.0 * day).sin() + 0.02 * ((t / 96) as f64).cos();
            scale * (0.45 + hump - solar + wiggle)
        })
        .collect()
}

/// Time-of-use price with evening shoulder.
pub fn tou_price(horizon: usize) -> Vec<f64> {
    (0..horizon)
        .map(|t| match t % 96 {
            0..=27 => 35.0,
            28..=63 => 60.0 + (t % 7) as f64,
            64..=83 => 110.0,
            _ => 50.0,
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn instance(
    spec: CalendarSpec,
    calendar: Calendar,
    activities: Vec<Activity>,
    rooms: Vec<Room>,
    batteries: Vec<Battery>,
    baseload_kw: Vec<f64>,
    price_per_mwh: Vec<f64>,
    peak_coefficient: f64,
) -> Instance {
    let inst = Instance {
        calendar_spec: spec,
        calendar,
        activities,
        rooms,
        batteries,
        cost: CostModel {
            price_per_mwh,
            peak_coefficient,
            net_zero_required: false,
        },
        baseload_kw,
    };
    inst.validate().unwrap();
    inst
}

pub fn rooms(sizes: &[u32]) -> Vec<Room> {
    sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| Room { id: format!("room{i}"), size: s })
        .collect()
}

/// November 2020 at 15-minute resolution, office hours on weekdays, ten
/// recurring activities and two batteries.
pub fn month_instance(block: usize) -> Instance {
    let (spec, cal) = calendar("2020-11-01T00:00:00+10:30", 2880, ("09:00", "17:00"), &WEEKDAYS);
    let acts = vec![
        activity("lecture-a", 8, 12.0, 2, 40),
        activity("lecture-b", 6, 10.0, 1, 40),
        activity("lab-1", 12, 18.0, 1, 20),
        activity("lab-2", 10, 15.0, 1, 20),
        activity("seminar-1", 4, 5.0, 1, 0),
        activity("seminar-2", 4, 6.0, 1, 0),
        activity("workshop", 16, 9.0, 2, 20),
        activity("meeting-1", 2, 3.0, 1, 0),
        activity("meeting-2", 3, 4.0, 1, 0),
        activity("exam", 12, 20.0, 3, 40),
    ];
    let base = building_baseload(&cal, 300.0);
    instance(
        spec,
        cal,
        acts,
        rooms(&[20, 30, 40, 60, 80]),
        vec![battery("b1", 200.0, 50.0, 100.0, block), battery("b2", 120.0, 30.0, 60.0, block)],
        base,
        tou_price(2880),
        0.005,
    )
}

/// One working week: cheap solar afternoons, a midday price spike, eight
/// recurring activities and one battery.
pub fn week_instance() -> Instance {
    let (spec, cal) = calendar("2020-11-02T00:00:00+10:30", 672, ("09:00", "17:00"), &WEEKDAYS);
    let acts = vec![
        activity("lecture", 8, 10.0, 2, 30),
        activity("lab", 6, 15.0, 1, 60),
        activity("tutorial", 4, 6.0, 1, 0),
        activity("seminar", 12, 8.0, 1, 30),
        activity("studio", 8, 12.0, 1, 30),
        activity("workshop", 6, 9.0, 1, 0),
        activity("review", 4, 7.0, 1, 0),
        activity("practical", 10, 11.0, 1, 60),
    ];
    let base = building_baseload(&cal, 200.0);
    let price = (0..672)
        .map(|t| match t % 96 {
            0..=27 => 35.0,
            28..=47 => 90.0,
            48..=55 => 400.0,
            56..=67 => 45.0,
            68..=83 => 110.0,
            _ => 50.0,
        })
        .collect();
    instance(
        spec,
        cal,
        acts,
        rooms(&[30, 60, 60]),
        vec![battery("bat", 160.0, 15.0, 80.0, 1)],
        base,
        price,
        0.005,
    )
}

/// One office day with a midday spike, small enough for exact solves.
pub fn small_instance() -> Instance {
    let (spec, cal) = calendar("2020-11-02T00:00:00+10:30", 96, ("09:00", "17:00"), &WEEKDAYS);
    let acts = vec![
        activity("lecture", 8, 6.0, 1, 30),
        activity("lab", 6, 9.0, 1, 60),
        activity("tutorial", 4, 4.0, 1, 0),
    ];
    let base = building_baseload(&cal, 60.0);
    let price = (0..96)
        .map(|t| match t {
            0..=27 => 35.0,
            28..=47 => 90.0 + (t % 5) as f64,
            48..=55 => 400.0,
            56..=67 => 45.0 + (t % 3) as f64,
            68..=83 => 110.0,
            _ => 50.0,
        })
        .collect();
    instance(spec, cal, acts, rooms(&[30, 60]), vec![battery("bat", 32.0, 8.0, 16.0, 8)], base, price, 0.005)
}
