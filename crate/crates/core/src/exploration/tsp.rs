//! Open-path routing through a set of targets.

use super::Point;

/// Length of the open path `start -> points[order[0]] -> points[order[1]] -> ...`.
pub fn route_length(points: &[Point], order: &[usize], start: Point) -> f64 {
    let mut pos = start;
    let mut total = 0.0;
    for &k in order {
        total += pos.distance(&points[k]);
        pos = points[k];
    }
    total
}

/// Orders `points` into an open path from `start` visiting each exactly once.
///
/// Nearest-neighbour construction followed by local search with 2-opt
/// segment reversals and or-opt segment moves (segments of up to three
/// stops), repeated until no move shortens the path.
pub fn plan_tsp_route(points: &[Point], start: Point) -> Vec<usize> {
    let mut order = nearest_neighbor(points, start);
    if order.len() < 2 {
        return order;
    }
    // path[0] is the fixed start, path[k + 1] = points[order[k]]
    let mut path: Vec<Point> = std::iter::once(start).chain(order.iter().map(|&k| points[k])).collect();
    let mut ids: Vec<usize> = std::iter::once(usize::MAX).chain(order.iter().copied()).collect();

    loop {
        let improved = two_opt_pass(&mut path, &mut ids) | or_opt_pass(&mut path, &mut ids);
        if !improved {
            break;
        }
    }
    order = ids[1..].to_vec();
    order
}

fn nearest_neighbor(points: &[Point], start: Point) -> Vec<usize> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut order = Vec::with_capacity(points.len());
    let mut pos = start;
    while !left.is_empty() {
        let (slot, _) = left
            .iter()
            .enumerate()
            .map(|(slot, &k)| (slot, pos.distance(&points[k])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        let k = left.remove(slot);
        pos = points[k];
        order.push(k);
    }
    order
}

const GAIN_EPS: f64 = 1e-10;

/// Reverses `path[i..=j]` whenever that shortens the path. Returns whether
/// anything changed.
fn two_opt_pass(path: &mut [Point], ids: &mut [usize]) -> bool {
    let n = path.len();
    let mut changed = false;
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n - 1 {
            for j in i + 1..n {
                let before = path[i - 1].distance(&path[i])
                    + if j + 1 < n { path[j].distance(&path[j + 1]) } else { 0.0 };
                let after = path[i - 1].distance(&path[j])
                    + if j + 1 < n { path[i].distance(&path[j + 1]) } else { 0.0 };
                if after < before - GAIN_EPS {
                    path[i..=j].reverse();
                    ids[i..=j].reverse();
                    improved = true;
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Moves a segment of 1..=3 consecutive stops (optionally reversed) to a
/// better position. Returns whether anything changed.
fn or_opt_pass(path: &mut Vec<Point>, ids: &mut Vec<usize>) -> bool {
    let mut changed = false;
    let mut improved = true;
    while improved {
        improved = false;
        let n = path.len();
        'search: for len in 1..=3usize {
            for i in 1..n {
                let j = i + len - 1;
                if j >= n {
                    break;
                }
                // removal gain
                let prev = path[i - 1];
                let next = path.get(j + 1).copied();
                let removed = prev.distance(&path[i]) + next.map_or(0.0, |q| path[j].distance(&q));
                let bridged = next.map_or(0.0, |q| prev.distance(&q));
                let gain = removed - bridged;
                if gain <= GAIN_EPS {
                    continue;
                }
                let seg: Vec<Point> = path[i..=j].to_vec();
                let seg_ids: Vec<usize> = ids[i..=j].to_vec();
                let mut rest: Vec<Point> = path[..i].to_vec();
                rest.extend_from_slice(&path[j + 1..]);
                let mut rest_ids: Vec<usize> = ids[..i].to_vec();
                rest_ids.extend_from_slice(&ids[j + 1..]);

                // insert between rest[p] and rest[p + 1] (or at the end)
                let mut best: Option<(usize, bool, f64)> = None;
                for p in 0..rest.len() {
                    let a = rest[p];
                    let b = rest.get(p + 1).copied();
                    let base = b.map_or(0.0, |b| a.distance(&b));
                    for reversed in [false, true] {
                        let (first, last) = if reversed { (seg[len - 1], seg[0]) } else { (seg[0], seg[len - 1]) };
                        let cost = a.distance(&first) + b.map_or(0.0, |b| last.distance(&b)) - base;
                        if cost < gain - GAIN_EPS && best.is_none_or(|(_, _, c)| cost < c) {
                            best = Some((p, reversed, cost));
                        }
                    }
                }
                if let Some((p, reversed, _)) = best {
                    let (mut seg, mut seg_ids) = (seg, seg_ids);
                    if reversed {
                        seg.reverse();
                        seg_ids.reverse();
                    }
                    rest.splice(p + 1..p + 1, seg);
                    rest_ids.splice(p + 1..p + 1, seg_ids);
                    *path = rest;
                    *ids = rest_ids;
                    improved = true;
                    changed = true;
                    break 'search;
                }
            }
        }
    }
    changed
}
