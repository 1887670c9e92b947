//! Planar polyline helpers.

pub type Point2 = [f64; 2];

pub fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Distance from `p` to the polyline `line`.
pub fn point_polyline_distance(p: Point2, line: &[Point2]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [a] => dist(p, *a),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Largest distance from a vertex of `a` to the polyline `b`.
pub fn directed_hausdorff(a: &[Point2], b: &[Point2]) -> f64 {
    a.iter().map(|&p| point_polyline_distance(p, b)).fold(0.0, f64::max)
}

pub fn hausdorff(a: &[Point2], b: &[Point2]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

pub fn polyline_length(line: &[Point2]) -> f64 {
    line.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// Prefix of `line` with arclength `len`, ending on an interpolated vertex.
pub fn truncate_at_length(line: &[Point2], len: f64) -> Vec<Point2> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    for (i, &p) in line.iter().enumerate() {
        if i == 0 {
            out.push(p);
            continue;
        }
        let prev = line[i - 1];
        let d = dist(prev, p);
        if acc + d >= len {
            let t = if d > 0.0 { (len - acc) / d } else { 0.0 };
            out.push([prev[0] + t * (p[0] - prev[0]), prev[1] + t * (p[1] - prev[1])]);
            return out;
        }
        acc += d;
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(point_segment_distance([0.5, 1.0], [0.0, 0.0], [1.0, 0.0]), 1.0);
        assert_eq!(point_segment_distance([2.0, 0.0], [0.0, 0.0], [1.0, 0.0]), 1.0);
        let a = [[0.0, 0.0], [1.0, 0.0]];
        let b = [[0.0, 0.1], [1.0, 0.1], [1.0, 0.5]];
        assert!((hausdorff(&a, &b) - 0.5).abs() < 1e-15);
        assert!((directed_hausdorff(&a, &b) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn truncation() {
        let l = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
        let t = truncate_at_length(&l, 1.5);
        assert_eq!(t.last().copied(), Some([1.0, 0.5]));
        assert!((polyline_length(&t) - 1.5).abs() < 1e-15);
    }
}
