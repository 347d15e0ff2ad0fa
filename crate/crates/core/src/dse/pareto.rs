/// `a` dominates `b` when it is no worse in both cost and latency and
/// strictly better in at least one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Indices of the non-dominated `(cost, latency)` points, ordered by cost
/// ascending (ties keep input order). Duplicates are all kept.
pub fn pareto_filter(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut keep = Vec::new();
    // Lowest latency among points with strictly smaller cost.
    let mut best_before = f64::INFINITY;
    let mut k = 0;
    while k < order.len() {
        let cost = points[order[k]].0;
        let group_end = order[k..]
            .iter()
            .position(|&i| points[i].0 != cost)
            .map_or(order.len(), |off| k + off);
        let group_min = points[order[k]].1;
        for &i in &order[k..group_end] {
            if points[i].1 == group_min && group_min < best_before {
                keep.push(i);
            }
        }
        best_before = best_before.min(group_min);
        k = group_end;
    }
    keep.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    keep
}
