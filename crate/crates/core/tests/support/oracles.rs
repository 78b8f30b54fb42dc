//! Brute-force references for the layout code. Nothing here calls into `scheduler`
//! beyond reading the assignments it produced.
#![allow(dead_code)]

use comet_core::scheduler::{LaneAssignment, Placement, ScreenConfig};

const TOL: f64 = 1e-9;

fn speed(screen: &ScreenConfig, width: u32) -> f64 {
    (screen.width_px as f64 + width as f64) / screen.scroll_duration_s
}

/// Left edge of a scrolling item at time `t`.
fn left(a: &LaneAssignment, screen: &ScreenConfig, t: f64) -> f64 {
    screen.width_px as f64 - speed(screen, a.width_px) * (t - a.enter_s)
}

fn centi(t: f64) -> i64 {
    (t * 100.0).round() as i64
}

/// Samples the pair every 10 ms over the span both are on screen and reports
/// whether their extents ever intersect. `a` is taken to be the earlier entrant.
pub fn simulate_pair(a: &LaneAssignment, b: &LaneAssignment, screen: &ScreenConfig) -> bool {
    let (a, b) = if a.enter_s <= b.enter_s { (a, b) } else { (b, a) };
    let a_exit = a.enter_s + screen.scroll_duration_s;
    let (from, to) = (centi(b.enter_s), centi(a_exit));
    (from..=to).any(|k| {
        let t = k as f64 / 100.0;
        let gap = left(b, screen, t) - (left(a, screen, t) + a.width_px as f64);
        gap < -TOL
    })
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct SimReport {
    pub overlaps: Vec<(String, String)>,
    pub max_delay_s: f64,
    pub dropped: usize,
}

/// 100 Hz sweep over every lane and pinned slot of a schedule.
pub fn simulate_schedule(schedule: &[LaneAssignment], times: &dyn Fn(&str) -> f64, screen: &ScreenConfig) -> SimReport {
    let mut rep = SimReport::default();
    let placed: Vec<&LaneAssignment> = schedule.iter().filter(|a| a.lane.is_some()).collect();
    rep.dropped = schedule.len() - placed.len();
    for a in &placed {
        rep.max_delay_s = rep.max_delay_s.max(a.enter_s - times(&a.danmaku_id));
    }
    let mut order = placed.clone();
    order.sort_by(|a, b| a.enter_s.total_cmp(&b.enter_s));
    let end = placed.iter().map(|a| centi(a.exit_s)).max().unwrap_or(0);
    let start = placed.iter().map(|a| centi(a.enter_s)).min().unwrap_or(0);
    let mut next = 0;
    let mut active: Vec<&LaneAssignment> = Vec::new();
    for k in start..=end {
        let t = k as f64 / 100.0;
        while next < order.len() && order[next].enter_s <= t + TOL {
            active.push(order[next]);
            next += 1;
        }
        active.retain(|a| t <= a.exit_s + TOL);
        let visible: Vec<&LaneAssignment> = active
            .iter()
            .copied()
            .filter(|a| match a.placement {
                Placement::Scroll => true,
                // a slot frees at exit, when the next one may take it
                _ => t < a.exit_s - TOL,
            })
            .collect();
        for (i, a) in visible.iter().enumerate() {
            for b in &visible[i + 1..] {
                if a.placement != b.placement || a.lane != b.lane {
                    continue;
                }
                let clash = match a.placement {
                    Placement::Scroll => {
                        let (xa, xb) = (left(a, screen, t), left(b, screen, t));
                        let (ea, eb) = (xa + a.width_px as f64, xb + b.width_px as f64);
                        xa.max(xb) < ea.min(eb) - TOL
                    }
                    _ => true,
                };
                if clash {
                    let pair = (a.danmaku_id.clone(), b.danmaku_id.clone());
                    if !rep.overlaps.contains(&pair) {
                        rep.overlaps.push(pair);
                    }
                }
            }
        }
    }
    rep
}
