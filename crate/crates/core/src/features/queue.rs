//! Queue detection on a position-sorted snapshot.
//!
//! A queue is a maximal run of at least five vehicles, every one slower than
//! 10 mph, with successive spacings under 0.01 mi. When several runs
//! qualify, the one nearest the work zone (largest head position) wins.

pub const QUEUE_SPEED_MPH: f64 = 10.0;
pub const QUEUE_SPACING_MI: f64 = 0.01;
pub const QUEUE_MIN_VEHICLES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct QueueDetection {
    /// Most upstream member (the leftmost vehicle).
    pub tail_pos_mi: f64,
    /// Most downstream member.
    pub head_pos_mi: f64,
    pub q_length_mi: f64,
    pub member_ids: Vec<u64>,
}

impl QueueDetection {
    /// Queue start expressed as miles upstream of the work-zone start
    /// (negative if the tail sits inside the work zone).
    pub fn start_queue_mi(&self, wz_start_mi: f64) -> f64 {
        wz_start_mi - self.tail_pos_mi
    }
}

/// Scan a snapshot of `(id, position, speed)` sorted by ascending position.
pub fn detect_queue(snapshot: &[(u64, f64, f64)]) -> Option<QueueDetection> {
    debug_assert!(snapshot.windows(2).all(|w| w[0].1 <= w[1].1));
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < snapshot.len() {
        if snapshot[i].2 >= QUEUE_SPEED_MPH {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < snapshot.len()
            && snapshot[j + 1].2 < QUEUE_SPEED_MPH
            && snapshot[j + 1].1 - snapshot[j].1 < QUEUE_SPACING_MI
        {
            j += 1;
        }
        if j - i + 1 >= QUEUE_MIN_VEHICLES {
            let better = match best {
                None => true,
                Some((_, bj)) => snapshot[j].1 > snapshot[bj].1,
            };
            if better {
                best = Some((i, j));
            }
        }
        i = j + 1;
    }
    best.map(|(i, j)| QueueDetection {
        tail_pos_mi: snapshot[i].1,
        head_pos_mi: snapshot[j].1,
        q_length_mi: snapshot[j].1 - snapshot[i].1,
        member_ids: snapshot[i..=j].iter().map(|v| v.0).collect(),
    })
}
