//! Library results checked against slow, independent reimplementations.

use latentscope_core::distortion::{
    dtw_align, mcd, shift_align, vde, AcousticTrack, AlignedPair, Metric,
};
use latentscope_core::experiment::{
    random_baseline, BaselineMethod, BaselineScheme, Bounds, GridGeometry,
};
use latentscope_core::latent::{fit_pca, fit_trend, select_features, SelectionConfig, TrendModel};
use latentscope_core::table::{EmbeddingSet, FeatureTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 3 {
        return None;
    }
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let cov = x.iter().zip(y).map(|(a, b)| (a - sx / n) * (b - sy / n)).sum::<f64>();
    let vx = x.iter().map(|a| (a - sx / n).powi(2)).sum::<f64>();
    let vy = y.iter().map(|b| (b - sy / n).powi(2)).sum::<f64>();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn dist(a: &[f64], b: &[f64], order: usize) -> f64 {
    (1..=order).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

fn random_cepstra(rng: &mut ChaCha8Rng, n: usize, order: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..=order).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect()
}

/// Minimum cost over every monotone path, by explicit enumeration.
fn exhaustive_dtw(a: &[Vec<f64>], b: &[Vec<f64>], order: usize) -> f64 {
    fn walk(i: usize, j: usize, a: &[Vec<f64>], b: &[Vec<f64>], order: usize, acc: f64, best: &mut f64) {
        let acc = acc + dist(&a[i], &b[j], order);
        if i == a.len() - 1 && j == b.len() - 1 {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(i + 1, j, a, b, order, acc, best);
        }
        if j + 1 < b.len() {
            walk(i, j + 1, a, b, order, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(i + 1, j + 1, a, b, order, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(0, 0, a, b, order, 0.0, &mut best);
    best
}

#[test]
fn dtw_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a = random_cepstra(&mut rng, n, 3);
        let b = random_cepstra(&mut rng, m, 3);
        let path = dtw_align(&a, &b, 3).unwrap();
        let oracle = exhaustive_dtw(&a, &b, 3);
        assert!((path.cost - oracle).abs() < 1e-9, "{} vs {oracle}", path.cost);
        let along: f64 = path.pairs.iter().map(|&(i, j)| dist(&a[i], &b[j], 3)).sum();
        assert!((along - path.cost).abs() < 1e-9);
        assert_eq!(path.pairs[0], (0, 0));
        assert_eq!(*path.pairs.last().unwrap(), (n - 1, m - 1));
        for w in path.pairs.windows(2) {
            let step = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(matches!(step, (1, 0) | (0, 1) | (1, 1)));
        }
    }
}

fn track(rng: &mut ChaCha8Rng, len: std::ops::Range<usize>) -> AcousticTrack {
    let n = rng.random_range(len);
    let voiced: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
    let f0 = voiced
        .iter()
        .map(|&v| if v { rng.random_range(80.0..300.0) } else { 0.0 })
        .collect();
    AcousticTrack::new(random_cepstra(rng, n, 4), voiced, f0).unwrap()
}

fn naive_metric(metric: Metric, r: &AcousticTrack, p: &AcousticTrack, k: i64) -> Option<f64> {
    let mut vals = Vec::new();
    for t in 0..r.len() as i64 {
        let u = t + k;
        if u < 0 || u >= p.len() as i64 {
            continue;
        }
        let (t, u) = (t as usize, u as usize);
        let v = match metric {
            Metric::Mcd => Some(dist(&r.cepstra[t], &p.cepstra[u], 4)),
            Metric::Vde => Some((r.voiced[t] != p.voiced[u]) as u8 as f64),
            Metric::F0Mse => (r.f0_hz[t] > 0.0 && p.f0_hz[u] > 0.0)
                .then(|| (r.f0_hz[t] - p.f0_hz[u]).powi(2)),
            Metric::Lf0Mse => (r.f0_hz[t] > 0.0 && p.f0_hz[u] > 0.0)
                .then(|| (r.f0_hz[t].ln() - p.f0_hz[u].ln()).powi(2)),
        };
        vals.extend(v);
    }
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[test]
fn shift_search_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let r = track(&mut rng, 4..30);
        let p = track(&mut rng, 4..30);
        let max_shift = rng.random_range(0..r.len().min(p.len()));
        for metric in Metric::ALL {
            // scan in the documented tie-breaking order
            let mut best: Option<(i64, f64)> = None;
            let order = std::iter::once(0).chain((1..=max_shift as i64).flat_map(|k| [-k, k]));
            for k in order {
                if let Some(v) = naive_metric(metric, &r, &p, k) {
                    if best.is_none_or(|b| v < b.1) {
                        best = Some((k, v));
                    }
                }
            }
            match (shift_align(&r, &p, max_shift, metric, 4, false), best) {
                (Ok(pair), Some((k, v))) => {
                    assert_eq!(pair.method, latentscope_core::distortion::AlignMethod::Shift(k));
                    assert!((pair.cost - v).abs() < 1e-9);
                }
                (Err(_), None) => {}
                (got, want) => panic!("{metric:?}: {got:?} vs {want:?}"),
            }
        }
    }
}

#[test]
fn metrics_match_naive_sums_on_any_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let r = track(&mut rng, 2..20);
        let p = track(&mut rng, 2..20);
        let path = dtw_align(&r.cepstra, &p.cepstra, 4).unwrap();
        let naive_mcd = path.pairs.iter().map(|&(i, j)| dist(&r.cepstra[i], &p.cepstra[j], 4)).sum::<f64>()
            / path.len() as f64;
        assert!((mcd(&path, &r.cepstra, &p.cepstra, 4, false).unwrap() - naive_mcd).abs() < 1e-9);
        let naive_vde = path.pairs.iter().filter(|&&(i, j)| r.voiced[i] != p.voiced[j]).count() as f64
            / path.len() as f64;
        assert!((vde(&path, &r.voiced, &p.voiced).unwrap() - naive_vde).abs() < 1e-12);
    }
}

#[test]
fn dtw_never_exceeds_an_extended_shift_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let r = track(&mut rng, 3..25);
        let p = track(&mut rng, 3..25);
        let k = rng.random_range(-(r.len() as i64 - 1)..p.len() as i64);
        let shift = AlignedPair::for_shift(r.len(), p.len(), k);
        if shift.is_empty() {
            continue;
        }
        // join the corners to the overlap with straight runs
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let (s0, s1) = shift.pairs[0];
        pairs.extend((0..s0).map(|i| (i, 0)));
        pairs.extend((0..s1).map(|j| (s0, j)));
        pairs.extend(&shift.pairs);
        let (e0, e1) = *shift.pairs.last().unwrap();
        pairs.extend((e1 + 1..p.len()).map(|j| (e0, j)));
        pairs.extend((e0 + 1..r.len()).map(|i| (i, p.len() - 1)));
        let cost: f64 = pairs.iter().map(|&(i, j)| dist(&r.cepstra[i], &p.cepstra[j], 4)).sum();
        let dtw = dtw_align(&r.cepstra, &p.cepstra, 4).unwrap();
        assert!(dtw.cost <= cost + 1e-9);
    }
}

/// Leading eigenpairs of the sample covariance by power iteration with
/// deflation.
fn power_pca(x: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    let n = x.len();
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in x {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1) as f64;
            }
        }
    }
    let mut out = Vec::new();
    for _ in 0..2 {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 0.01).collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            lambda = norm;
            v = w.iter().map(|a| a / norm).collect();
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda, v));
    }
    out
}

#[test]
fn pca_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..20 {
        let d = rng.random_range(3..8);
        let scales: Vec<f64> = (0..d).map(|i| 3.0 / (i as f64 + 1.0)).collect();
        let vectors: Vec<Vec<f64>> = (0..60)
            .map(|_| scales.iter().map(|s| s * rng.random_range(-1.0..1.0) + 0.5).collect())
            .collect();
        let ids = (0..60).map(|i| format!("u{trial}_{i}")).collect();
        let set = EmbeddingSet::new(ids, vectors.clone()).unwrap();
        let proj = fit_pca(&set).unwrap();
        for (k, (lambda, v)) in power_pca(&vectors).into_iter().enumerate() {
            assert!((proj.explained_variance[k] - lambda).abs() < 1e-6 * lambda.max(1.0));
            let dot: f64 = v.iter().zip(&proj.components[k]).map(|(a, b)| a * b).sum();
            assert!(dot.abs() > 1.0 - 1e-6, "component {k}: |dot| = {}", dot.abs());
        }
    }
}

/// Uncentered 3×3 normal equations solved by Cramer's rule.
fn cramer_plane(points: &[[f64; 2]], v: &[f64]) -> (f64, f64, f64) {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (p, y) in points.iter().zip(v) {
        let row = [p[0], p[1], 1.0];
        for i in 0..3 {
            r[i] += row[i] * y;
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let solve = |col: usize| {
        let mut mm = m;
        for i in 0..3 {
            mm[i][col] = r[i];
        }
        det(&mm) / d
    };
    (solve(0), solve(1), solve(2))
}

#[test]
fn plane_fit_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let n = rng.random_range(5..80);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)]).collect();
        let v: Vec<f64> = pts.iter().map(|p| 0.7 * p[0] - 1.3 * p[1] + 2.0 + rng.random_range(-1.0..1.0)).collect();
        let t = fit_trend(&pts, &v.iter().copied().map(Some).collect::<Vec<_>>(), "f").unwrap();
        let (a, b, c) = cramer_plane(&pts, &v);
        assert!((t.a - a).abs() < 1e-7 && (t.b - b).abs() < 1e-7 && (t.c - c).abs() < 1e-7);
        let pred: Vec<f64> = pts.iter().map(|p| a * p[0] + b * p[1] + c).collect();
        let apcc = naive_pearson(&pred, &v).unwrap().abs();
        assert!((t.apcc.unwrap() - apcc).abs() < 1e-9);
    }
}

/// Brute force over every subset: the kept set before the weak filter is the
/// unique S where each feature is in S exactly when no higher-ranked member
/// of S correlates with it above the cutoff.
fn brute_force_selection(ranked: &[(String, Option<f64>)], cols: &[Vec<f64>], cutoff: f64, weak: f64) -> Vec<String> {
    let n = ranked.len();
    let redundant = |i: usize, j: usize| naive_pearson(&cols[i], &cols[j]).is_some_and(|r| r.abs() > cutoff);
    let mut solutions = Vec::new();
    for mask in 0u32..(1 << n) {
        let ok = (0..n).all(|i| {
            let blocked = (0..i).any(|j| mask >> j & 1 == 1 && redundant(i, j));
            (mask >> i & 1 == 1) == !blocked
        });
        if ok {
            solutions.push(mask);
        }
    }
    assert_eq!(solutions.len(), 1);
    (0..n)
        .filter(|&i| solutions[0] >> i & 1 == 1 && ranked[i].1.is_some_and(|a| a > weak))
        .map(|i| ranked[i].0.clone())
        .collect()
}

#[test]
fn selection_matches_subset_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n_feat = rng.random_range(1..=9);
        let rows = 30;
        let base: Vec<Vec<f64>> = (0..3).map(|_| (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let cols: Vec<Vec<f64>> = (0..n_feat)
            .map(|_| {
                let src = &base[rng.random_range(0..3)];
                let noise = rng.random_range(0.0..1.5);
                src.iter().map(|v| v + noise * rng.random_range(-1.0..1.0)).collect()
            })
            .collect();
        let names: Vec<String> = (0..n_feat).map(|i| format!("f{i}")).collect();
        let trends: Vec<TrendModel> = names
            .iter()
            .map(|name| TrendModel {
                feature: name.clone(),
                a: 1.0,
                b: 0.0,
                c: 0.0,
                apcc: rng.random_bool(0.9).then(|| (rng.random_range(0..10) as f64) / 10.0),
                gradient: None,
                n: rows,
                cv_apcc: None,
            })
            .collect();
        let table = FeatureTable::new(
            (0..rows).map(|i| format!("u{i}")).collect(),
            names.clone(),
            (0..rows).map(|r| cols.iter().map(|c| Some(c[r])).collect()).collect(),
        )
        .unwrap();
        let mut ranked: Vec<(usize, Option<f64>)> = trends.iter().enumerate().map(|(i, t)| (i, t.apcc)).collect();
        ranked.sort_by(|x, y| {
            let key = |a: Option<f64>| a.map_or(f64::NEG_INFINITY, |v| v);
            key(y.1).total_cmp(&key(x.1)).then(names[x.0].cmp(&names[y.0]))
        });
        let ranked_cols: Vec<Vec<f64>> = ranked.iter().map(|(i, _)| cols[*i].clone()).collect();
        let ranked_named: Vec<(String, Option<f64>)> = ranked.iter().map(|(i, a)| (names[*i].clone(), *a)).collect();
        let want = brute_force_selection(&ranked_named, &ranked_cols, 0.8, 0.3);
        let got = select_features(&trends, &table, &SelectionConfig::default()).unwrap();
        assert_eq!(got.kept, want);
        assert_eq!(got.kept.len() + got.eliminated.len(), n_feat);
    }
}

#[test]
fn exact_baselines_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (x0, y0) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let (w, h) = (rng.random_range(0.1..10.0), rng.random_range(0.1..10.0));
        let res = rng.random_range(2..40);
        let g = GridGeometry::new(Bounds::new(x0, x0 + w, y0, y0 + h).unwrap(), res, 5).unwrap();
        // in grid units, anchors sit at (j + 0.5, i + 0.5) and lattice
        // points at (5 xi / (res - 1), 5 yi / (res - 1))
        let anchors: Vec<(f64, f64)> = (0..25).map(|k| ((k % 5) as f64 + 0.5, (k / 5) as f64 + 0.5)).collect();
        let mut aa = 0.0;
        for p in &anchors {
            for q in &anchors {
                aa += (p.0 - q.0).hypot(p.1 - q.1);
            }
        }
        let got = random_baseline(&g, BaselineScheme::AnchorToAnchor, None, 0).unwrap();
        assert!((got.expected - aa / 625.0).abs() < 1e-12);
        assert_eq!(got.method, BaselineMethod::ExactEnumeration { pairs: 625 });

        let step = 5.0 / (res - 1) as f64;
        let mut al = 0.0;
        for p in &anchors {
            for xi in 0..res {
                for yi in 0..res {
                    al += (p.0 - xi as f64 * step).hypot(p.1 - yi as f64 * step);
                }
            }
        }
        let got = random_baseline(&g, BaselineScheme::AnchorToLattice, None, 0).unwrap();
        assert!((got.expected - al / (25 * res * res) as f64).abs() < 1e-9);
    }
}

#[test]
fn anchor_baseline_constant() {
    let g = GridGeometry::new(Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap(), 100, 5).unwrap();
    let got = random_baseline(&g, BaselineScheme::AnchorToAnchor, None, 0).unwrap();
    assert!((got.expected - 2.547564980363847).abs() < 1e-12);
}
