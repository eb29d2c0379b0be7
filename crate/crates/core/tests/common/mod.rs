//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use eol_mistrust::treatments::Span;

/// Twice the U statistic of `a` by direct pair counting (a > b scores 2, ties 1).
pub fn doubled_u(a: &[f64], b: &[f64]) -> i64 {
    let mut u = 0;
    for &x in a {
        for &y in b {
            u += match x.partial_cmp(&y).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    u
}

/// Two-sided permutation p by visiting every way of choosing which pooled
/// values form the first sample.
pub fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n1, n) = (a.len(), pooled.len());
    assert!(n <= 24, "enumeration oracle is for small samples");
    let center = (n1 * (n - n1)) as i64; // doubled null mean
    let observed = (doubled_u(a, b) - center).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let (mut x, mut y) = (Vec::with_capacity(n1), Vec::with_capacity(n - n1));
        for (i, &v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                x.push(v)
            } else {
                y.push(v)
            }
        }
        total += 1;
        if (doubled_u(&x, &y) - center).abs() >= observed {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Merge oracle: connected components of the graph joining spans whose gap
/// is at most `max_gap`, found with union-find over all pairs.
pub fn merge_by_components(spans: &[(i64, i64)], max_gap: i64) -> Vec<(i64, i64)> {
    let n = spans.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (spans[i], spans[j]);
            let gap = a.0.max(b.0) - a.1.min(b.1);
            if gap <= max_gap {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (i64, i64)> = Default::default();
    for (i, &s) in spans.iter().enumerate() {
        let r = find(&mut parent, i);
        let e = groups.entry(r).or_insert(s);
        e.0 = e.0.min(s.0);
        e.1 = e.1.max(s.1);
    }
    let mut out: Vec<(i64, i64)> = groups.into_values().collect();
    out.sort();
    out
}

pub fn to_spans(raw: &[(i64, i64)]) -> Vec<Span> {
    raw.iter().map(|&(s, e)| Span::new(s, e)).collect()
}

pub fn from_spans(spans: &[Span]) -> Vec<(i64, i64)> {
    spans.iter().map(|s| (s.start, s.end)).collect()
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// L1 logistic objective for one feature, written out term by term.
pub fn objective_1d(x: &[f64], y: &[bool], w: f64, b: f64, c: f64) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let t = if yi { 1.0 } else { -1.0 };
            let m = t * (w * xi + b);
            // log(1 + exp(-m)), stable for large |m|
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum();
    loss + w.abs() / c
}

/// Profile minimizer: golden section over w, with b minimized by an inner
/// golden section for every trial w.
pub fn golden_fit_1d(x: &[f64], y: &[bool], c: f64) -> (f64, f64) {
    let best_b = |w: f64| golden_section(|b| objective_1d(x, y, w, b, c), -40.0, 40.0, 1e-10);
    let w = golden_section(|w| objective_1d(x, y, w, best_b(w), c), -40.0, 40.0, 1e-9);
    (w, best_b(w))
}
