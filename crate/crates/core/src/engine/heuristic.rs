//! Constructive schedule used to seed the second-stage search: activities
//! go where they raise the peak least (cheapest among ties under the cap),
//! then each battery discharges wherever the cap demands it, charges in the
//! cheapest admissible blocks, and trades the remaining price spread.

use super::formulation::{start_candidates, within_week, FormulationMap};
use crate::instance::Instance;
use std::collections::BTreeSet;

const EPS: f64 = 1e-9;
/// Pair trials per discharge block in the arbitrage pass.
const PAIR_TRIES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub starts: Vec<usize>,
    /// Per battery, per decision block: 1 charge, 0 idle, -1 discharge.
    pub blocks: Vec<Vec<i8>>,
}

/// Activities in an order compatible with precedence, heaviest first among
/// those ready.
fn placement_order(inst: &Instance) -> Vec<usize> {
    let index = inst.activity_index();
    let n = inst.activities.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for (a, act) in inst.activities.iter().enumerate() {
        for p in &act.precedence {
            let p = index[p.as_str()];
            succ[p].push(a);
            indeg[a] += 1;
        }
    }
    let key = |a: usize| (std::cmp::Reverse(ordered(inst.activities[a].load_kw())), a);
    let mut ready: BTreeSet<_> = (0..n).filter(|&a| indeg[a] == 0).map(key).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(k) = ready.pop_first() {
        let a = k.1;
        out.push(a);
        for &s in &succ[a] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(key(s));
            }
        }
    }
    out
}

/// Total order on finite non-negative loads.
fn ordered(v: f64) -> u64 {
    v.to_bits()
}

/// Place activities one by one. Starts whose peak stays under `target` are
/// judged on cost alone; above it, on the peak.
fn place_activities(inst: &Instance, target: f64, q: &mut [f64]) -> Option<Vec<usize>> {
    let acts = &inst.activities;
    let frame = inst.calendar.week_frame();
    let t_len = inst.horizon();
    let tiers: Vec<u32> = acts.iter().map(|a| a.room_size_min).collect::<BTreeSet<_>>().into_iter().collect();
    let room_cap: Vec<usize> = tiers.iter().map(|&s| inst.rooms_at_least(s)).collect();
    let mut used = vec![vec![0usize; frame]; tiers.len()];
    let index = inst.activity_index();
    let mut starts = vec![usize::MAX; acts.len()];
    let occurrences = |w: usize, dur: usize| {
        (0..)
            .map(move |k| w + k * frame)
            .take_while(move |&s| s + dur <= t_len)
            .flat_map(move |s| s..s + dur)
    };
    for a in placement_order(inst) {
        let act = &acts[a];
        let load = act.load_kw();
        let earliest = act
            .precedence
            .iter()
            .map(|p| {
                let p = index[p.as_str()];
                starts[p] + acts[p].duration
            })
            .max()
            .unwrap_or(0);
        let mut best: Option<((f64, f64), usize)> = None;
        for w in start_candidates(inst, a) {
            if w < earliest {
                continue;
            }
            let rooms_ok = tiers.iter().enumerate().filter(|(_, &s)| s <= act.room_size_min).all(|(i, _)| {
                (w..w + act.duration).all(|tau| used[i][tau] + act.rooms_required <= room_cap[i])
            });
            if !rooms_ok {
                continue;
            }
            let (mut peak, mut price) = (f64::NEG_INFINITY, 0.0);
            for t in occurrences(w, act.duration) {
                peak = peak.max(q[t] + load);
                price += inst.cost.price_per_mwh[t];
            }
            let key = (peak.max(target), price * load);
            if best.is_none_or(|(k, _)| key.0 < k.0 - EPS || (key.0 <= k.0 + EPS && key.1 < k.1 - EPS)) {
                best = Some((key, w));
            }
        }
        let (_, w) = best?;
        starts[a] = w;
        for (i, &s) in tiers.iter().enumerate() {
            if s <= act.room_size_min {
                for tau in w..w + act.duration {
                    used[i][tau] += act.rooms_required;
                }
            }
        }
        for t in occurrences(w, act.duration) {
            q[t] += load;
        }
        debug_assert_eq!(within_week(w, frame), w);
    }
    Some(starts)
}

/// Batteries sharing one block grid, planned together against the residual
/// load left by the activities.
struct Fleet {
    /// Largest residual load in each block.
    hi: Vec<f64>,
    /// Money per kW held over each block.
    value: Vec<f64>,
    len: Vec<f64>,
    cap: f64,
    units: Vec<Unit>,
}

struct Unit {
    power: f64,
    gain: Vec<f64>,
    loss: Vec<f64>,
    capacity: f64,
    initial: f64,
    u: Vec<i8>,
}

impl Unit {
    fn soc(&self) -> Vec<f64> {
        let mut s = self.initial;
        self.u
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                s += match u {
                    1 => self.gain[k],
                    -1 => -self.loss[k],
                    _ => 0.0,
                };
                s
            })
            .collect()
    }

    /// Would shifting every state from block `k` on by `delta` stay in range?
    fn fits(&self, soc: &[f64], k: usize, delta: f64) -> bool {
        soc[k..].iter().all(|&s| s + delta >= -EPS && s + delta <= self.capacity + EPS)
    }
}

impl Fleet {
    fn net(&self, k: usize) -> f64 {
        self.units.iter().map(|u| u.power * u.u[k] as f64).sum()
    }

    fn unit_price(&self, k: usize) -> f64 {
        self.value[k] / self.len[k]
    }

    fn can_charge(&self, b: usize, k: usize) -> bool {
        self.units[b].u[k] == 0 && self.hi[k] + self.net(k) + self.units[b].power <= self.cap + EPS
    }

    /// Add the cheapest earlier charges until battery `b` can discharge at
    /// block `k`.
    fn fund(&mut self, b: usize, k: usize) -> bool {
        loop {
            let soc = self.units[b].soc();
            if soc[k] >= -EPS {
                return true;
            }
            let pick = (0..k)
                .filter(|&j| self.can_charge(b, j) && self.units[b].fits(&soc, j, self.units[b].gain[j]))
                .min_by(|&x, &y| self.unit_price(x).total_cmp(&self.unit_price(y)).then(y.cmp(&x)));
            match pick {
                Some(j) => self.units[b].u[j] = 1,
                None => return false,
            }
        }
    }

    fn snapshot(&self) -> Vec<Vec<i8>> {
        self.units.iter().map(|u| u.u.clone()).collect()
    }

    fn restore(&mut self, snap: Vec<Vec<i8>>) {
        for (u, s) in self.units.iter_mut().zip(snap) {
            u.u = s;
        }
    }

    /// Subsets of batteries in the order they are tried for a shortfall:
    /// least total power first.
    fn subsets(&self) -> Vec<u32> {
        let n = self.units.len().min(12);
        let mut masks: Vec<u32> = (1..1u32 << n).collect();
        let power = |m: u32| -> f64 { (0..n).filter(|&b| m >> b & 1 == 1).map(|b| self.units[b].power).sum() };
        masks.sort_by(|&a, &b| power(a).total_cmp(&power(b)).then(a.cmp(&b)));
        masks
    }

    fn run(&mut self) {
        let nb = self.hi.len();
        let masks = self.subsets();
        for k in 0..nb {
            let need = self.hi[k] + self.net(k) - self.cap;
            if need <= EPS {
                continue;
            }
            for &mask in &masks {
                let members: Vec<usize> = (0..self.units.len()).filter(|&b| mask >> b & 1 == 1).collect();
                if members.iter().any(|&b| self.units[b].u[k] != 0) {
                    continue;
                }
                if members.iter().map(|&b| self.units[b].power).sum::<f64>() < need - EPS {
                    continue;
                }
                let snap = self.snapshot();
                for &b in &members {
                    self.units[b].u[k] = -1;
                }
                if members.iter().all(|&b| self.fund(b, k)) {
                    break;
                }
                self.restore(snap);
            }
        }
        let mut by_price: Vec<usize> = (0..nb).collect();
        by_price.sort_by(|&a, &b| self.unit_price(b).total_cmp(&self.unit_price(a)).then(a.cmp(&b)));
        for b in 0..self.units.len() {
            // spend stored energy where it is worth most
            for &k in &by_price {
                let unit = &self.units[b];
                if unit.u[k] == 0 && self.value[k] > 0.0 && unit.fits(&unit.soc(), k, -unit.loss[k]) {
                    self.units[b].u[k] = -1;
                }
            }
            // buy low, sell high
            for &k in &by_price {
                if self.units[b].u[k] != 0 {
                    continue;
                }
                let soc = self.units[b].soc();
                let mut cheap: Vec<usize> = (0..k).filter(|&j| self.can_charge(b, j)).collect();
                cheap.sort_by(|&x, &y| self.unit_price(x).total_cmp(&self.unit_price(y)).then(x.cmp(&y)));
                let unit = &self.units[b];
                let pick = cheap
                    .into_iter()
                    .take(PAIR_TRIES)
                    .take_while(|&j| self.value[k] > self.value[j] + EPS)
                    .find(|&j| {
                        soc[j..k].iter().all(|&s| s + unit.gain[j] <= unit.capacity + EPS)
                            && soc[k..].iter().all(|&s| {
                                let v = s + unit.gain[j] - unit.loss[k];
                                (-EPS..=unit.capacity + EPS).contains(&v)
                            })
                    });
                if let Some(j) = pick {
                    self.units[b].u[j] = 1;
                    self.units[b].u[k] = -1;
                }
            }
            // negative prices pay for charging
            for k in 0..nb {
                if self.value[k] < 0.0 && self.can_charge(b, k) {
                    let unit = &self.units[b];
                    if unit.fits(&unit.soc(), k, unit.gain[k]) {
                        self.units[b].u[k] = 1;
                    }
                }
            }
        }
    }
}

/// Joint states kept per block by the dynamic program.
const MAX_STATES: usize = 2048;

impl Fleet {
    /// Cheapest joint dispatch by dynamic programming over state of charge.
    /// States closer than a bucket width are merged, keeping the cheaper;
    /// with lossless batteries and a bucket below one block of energy the
    /// result is exact.
    fn optimal(&self) -> Option<Vec<Vec<i8>>> {
        let n = self.units.len();
        if n == 0 {
            return Some(Vec::new());
        }
        if n > 6 {
            return None;
        }
        let nb = self.hi.len();
        let mut width: Vec<f64> = self
            .units
            .iter()
            .map(|u| 0.5 * u.gain.iter().chain(&u.loss).copied().fold(f64::INFINITY, f64::min))
            .collect();
        let count = |w: &[f64]| -> f64 { self.units.iter().zip(w).map(|(u, w)| (u.capacity / w).floor() + 1.0).product() };
        while count(&width) > MAX_STATES as f64 {
            width.iter_mut().for_each(|w| *w *= 1.25);
        }
        let combos: Vec<Vec<i8>> = (0..3usize.pow(n as u32))
            .map(|mut c| {
                (0..n)
                    .map(|_| {
                        let d = [0, -1, 1][c % 3];
                        c /= 3;
                        d
                    })
                    .collect()
            })
            .collect();
        // per layer: (parent state, combo) for each state
        let mut history: Vec<Vec<(u32, u16)>> = Vec::with_capacity(nb);
        let mut states: Vec<(Vec<f64>, f64)> = vec![(self.units.iter().map(|u| u.initial).collect(), 0.0)];
        for k in 0..nb {
            let mut next: Vec<(Vec<f64>, f64)> = Vec::new();
            let mut back: Vec<(u32, u16)> = Vec::new();
            let mut seen: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
            for (si, (soc, cost)) in states.iter().enumerate() {
                for (ci, combo) in combos.iter().enumerate() {
                    let net: f64 = self.units.iter().zip(combo).map(|(u, &d)| u.power * d as f64).sum();
                    if self.hi[k] + net > self.cap + EPS {
                        continue;
                    }
                    let mut ok = true;
                    let new: Vec<f64> = self
                        .units
                        .iter()
                        .zip(combo)
                        .zip(soc)
                        .map(|((u, &d), &s)| {
                            let v = match d {
                                1 => s + u.gain[k],
                                -1 => s - u.loss[k],
                                _ => s,
                            };
                            ok &= v >= -EPS && v <= u.capacity + EPS;
                            v
                        })
                        .collect();
                    if !ok {
                        continue;
                    }
                    let c = cost + self.value[k] * net;
                    let key: Vec<i64> = new.iter().zip(&width).map(|(v, w)| (v / w).round() as i64).collect();
                    match seen.get(&key) {
                        Some(&i) if next[i].1 <= c + EPS => {}
                        Some(&i) => {
                            next[i] = (new, c);
                            back[i] = (si as u32, ci as u16);
                        }
                        None => {
                            seen.insert(key, next.len());
                            next.push((new, c));
                            back.push((si as u32, ci as u16));
                        }
                    }
                }
            }
            if next.is_empty() {
                return None;
            }
            history.push(back);
            states = next;
        }
        let mut at = (0..states.len()).min_by(|&a, &b| states[a].1.total_cmp(&states[b].1).then(a.cmp(&b)))?;
        let mut plans = vec![vec![0i8; nb]; n];
        for k in (0..nb).rev() {
            let (parent, ci) = history[k][at];
            for (b, &d) in combos[ci as usize].iter().enumerate() {
                plans[b][k] = d;
            }
            at = parent as usize;
        }
        Some(plans)
    }
}

/// Plan the batteries in `group` (all with block length `block`) and add
/// their power to `q`.
fn dispatch(inst: &Instance, group: &[usize], block: usize, cap: f64, q: &mut [f64], out: &mut [Vec<i8>]) {
    let t_len = inst.horizon();
    let h = inst.calendar.interval_hours;
    let nb = t_len.div_ceil(block);
    let range = |k: usize| k * block..((k + 1) * block).min(t_len);
    let len: Vec<f64> = (0..nb).map(|k| range(k).len() as f64).collect();
    let mut fleet = Fleet {
        hi: (0..nb).map(|k| range(k).map(|t| q[t]).fold(f64::NEG_INFINITY, f64::max)).collect(),
        value: (0..nb)
            .map(|k| range(k).map(|t| inst.cost.price_per_mwh[t] / 1000.0 * h).sum())
            .collect(),
        len: len.clone(),
        cap,
        units: group
            .iter()
            .map(|&b| {
                let bat = &inst.batteries[b];
                let energy: Vec<f64> = len.iter().map(|l| l * h * bat.power_kw).collect();
                Unit {
                    power: bat.power_kw,
                    gain: energy.iter().map(|e| e * bat.efficiency).collect(),
                    loss: energy.iter().map(|e| e / bat.efficiency).collect(),
                    capacity: bat.capacity_kwh,
                    initial: bat.initial_soc_kwh,
                    u: vec![0; nb],
                }
            })
            .collect(),
    };
    let o = fleet.optimal();
    match o {
        Some(plans) => {
            for (unit, u) in fleet.units.iter_mut().zip(plans) {
                unit.u = u;
            }
        }
        None => fleet.run(),
    }
    for (&b, unit) in group.iter().zip(fleet.units) {
        for (k, &u) in unit.u.iter().enumerate() {
            for t in range(k) {
                q[t] += unit.power * u as f64;
            }
        }
        out[b] = unit.u;
    }
}

fn attempt(inst: &Instance, cap: f64, target: f64) -> Option<(Plan, f64)> {
    let mut q = inst.baseload_kw.clone();
    let starts = place_activities(inst, target, &mut q)?;
    let mut blocks = vec![Vec::new(); inst.batteries.len()];
    let grids: BTreeSet<usize> = inst.batteries.iter().map(|b| b.decision_block).collect();
    for block in grids {
        let group: Vec<usize> = (0..inst.batteries.len())
            .filter(|&b| inst.batteries[b].decision_block == block)
            .collect();
        dispatch(inst, &group, block, cap, &mut q, &mut blocks);
    }
    if q.iter().any(|&v| v > cap + EPS) {
        return None;
    }
    if inst.cost.net_zero_required && q.iter().sum::<f64>() > 0.0 {
        return None;
    }
    let cost = q.iter().zip(&inst.cost.price_per_mwh).map(|(p, c)| p * c).sum();
    Some((Plan { starts, blocks }, cost))
}

/// A schedule that satisfies every stage-two row under `cap`, if the greedy
/// finds one. Activity placement is retried against targets that leave
/// more and more battery headroom below the cap; the cheapest success wins.
pub fn greedy_plan(inst: &Instance, cap: f64) -> Option<Plan> {
    let power: f64 = inst.batteries.iter().map(|b| b.power_kw).sum();
    let mut targets: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|f| cap - f * power).collect();
    targets.dedup();
    targets.push(f64::NEG_INFINITY);
    let mut best: Option<(Plan, f64)> = None;
    for target in targets {
        if let Some((plan, cost)) = attempt(inst, cap, target) {
            if best.as_ref().is_none_or(|b| cost < b.1 - EPS) {
                best = Some((plan, cost));
            }
        }
    }
    best.map(|b| b.0)
}

/// Column vector for `plan` in a problem built with `map`.
pub fn plan_columns(inst: &Instance, map: &FormulationMap, plan: &Plan) -> Vec<f64> {
    let mut x = vec![0.0; map.num_columns];
    for (cols, &w) in map.start_vars.iter().zip(&plan.starts) {
        let &(_, j) = cols.iter().find(|c| c.0 == w).expect("plan start is a candidate");
        x[j] = 1.0;
    }
    let t_len = inst.horizon();
    let h = inst.calendar.interval_hours;
    for (b, bat) in inst.batteries.iter().enumerate() {
        let mut soc = bat.initial_soc_kwh;
        for (k, &u) in plan.blocks[b].iter().enumerate() {
            let len = bat.decision_block.min(t_len - k * bat.decision_block) as f64;
            let e = len * h * bat.power_kw;
            match u {
                1 => {
                    x[map.charge_vars[b][k]] = 1.0;
                    soc += e * bat.efficiency;
                }
                -1 => {
                    x[map.discharge_vars[b][k]] = 1.0;
                    soc -= e / bat.efficiency;
                }
                _ => {}
            }
            x[map.soc_vars[b][k]] = soc.clamp(0.0, bat.capacity_kwh);
        }
    }
    x
}
