use super::EngineError;
use crate::instance::Instance;

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Activities in processing order: larger size requirement first, then
/// earlier start, then input order.
fn order(inst: &Instance, starts: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..inst.activities.len()).collect();
    idx.sort_by_key(|&a| (std::cmp::Reverse(inst.activities[a].room_size_min), starts[a], a));
    idx
}

/// Rooms by ascending size, then input order.
fn room_order(inst: &Instance) -> Vec<usize> {
    let mut r: Vec<usize> = (0..inst.rooms.len()).collect();
    r.sort_by_key(|&i| (inst.rooms[i].size, i));
    r
}

struct State<'a> {
    inst: &'a Instance,
    spans: Vec<(usize, usize)>,
    /// Busy intervals per room, as activity indices.
    busy: Vec<Vec<usize>>,
    out: Vec<Vec<usize>>,
}

impl State<'_> {
    fn free(&self, room: usize, a: usize) -> bool {
        self.inst.rooms[room].size >= self.inst.activities[a].room_size_min
            && self.busy[room].iter().all(|&o| !overlaps(self.spans[o], self.spans[a]))
    }

    fn greedy(&mut self, acts: &[usize], rooms: &[usize]) -> bool {
        for &a in acts {
            let need = self.inst.activities[a].rooms_required;
            let picked: Vec<usize> = rooms.iter().copied().filter(|&r| self.free(r, a)).take(need).collect();
            if picked.len() < need {
                return false;
            }
            for &r in &picked {
                self.busy[r].push(a);
            }
            self.out[a] = picked;
        }
        true
    }

    fn backtrack(&mut self, acts: &[usize], rooms: &[usize]) -> bool {
        let Some((&a, rest)) = acts.split_first() else {
            return true;
        };
        let options: Vec<usize> = rooms.iter().copied().filter(|&r| self.free(r, a)).collect();
        let need = self.inst.activities[a].rooms_required;
        let mut chosen = Vec::with_capacity(need);
        self.choose(a, &options, 0, need, &mut chosen, rest, rooms)
    }

    #[allow(clippy::too_many_arguments)]
    fn choose(
        &mut self,
        a: usize,
        options: &[usize],
        from: usize,
        need: usize,
        chosen: &mut Vec<usize>,
        rest: &[usize],
        rooms: &[usize],
    ) -> bool {
        if chosen.len() == need {
            for &r in chosen.iter() {
                self.busy[r].push(a);
            }
            if self.backtrack(rest, rooms) {
                self.out[a] = chosen.clone();
                return true;
            }
            for &r in chosen.iter() {
                self.busy[r].pop();
            }
            return false;
        }
        for i in from..options.len() {
            if options.len() - i < need - chosen.len() {
                break;
            }
            chosen.push(options[i]);
            if self.choose(a, options, i + 1, need, chosen, rest, rooms) {
                return true;
            }
            chosen.pop();
        }
        false
    }
}

/// Concrete rooms for each activity given within-week starts: best-fit
/// greedy, then exhaustive search if greedy gets stuck.
pub fn assign_rooms(inst: &Instance, starts: &[usize]) -> Result<Vec<Vec<String>>, EngineError> {
    let spans: Vec<(usize, usize)> = inst
        .activities
        .iter()
        .zip(starts)
        .map(|(a, &w)| (w, w + a.duration))
        .collect();
    let acts = order(inst, starts);
    let rooms = room_order(inst);
    let fresh = |inst| State {
        inst,
        spans: spans.clone(),
        busy: vec![Vec::new(); inst.rooms.len()],
        out: vec![Vec::new(); inst.activities.len()],
    };
    let mut st = fresh(inst);
    if !st.greedy(&acts, &rooms) {
        log::debug!("greedy room assignment failed, searching exhaustively");
        st = fresh(inst);
        if !st.backtrack(&acts, &rooms) {
            return Err(EngineError::AssignmentFailed);
        }
    }
    Ok(st
        .out
        .into_iter()
        .map(|rs| {
            let mut ids: Vec<usize> = rs;
            ids.sort_unstable();
            ids.into_iter().map(|r| inst.rooms[r].id.clone()).collect()
        })
        .collect())
}
