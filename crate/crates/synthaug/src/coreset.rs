//! Gradient-matching coreset selection.
//!
//! Candidates are represented by last-layer gradient proxies (softmax output
//! minus one-hot label). Selection maximizes the facility-location objective
//! Σ_i max_{j∈S} (d_max − d_ij) over pairwise Euclidean proxy distances with
//! a lazy greedy, then weights each medoid by the size of its nearest-medoid
//! cluster. A brute-force maximizer over small instances serves as the
//! oracle for the (1 − 1/e) guarantee.

use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{contract, Error, Result};
use crate::model::ModelParams;
use crate::numkernel::l2_norm;

pub const PROXY_MAGIC: u32 = 0x4352_4147;

/// Per-example last-layer gradient vectors, each of length K and summing to
/// zero (softmax probabilities minus a one-hot label).
#[derive(Debug, Clone)]
pub struct GradientProxy {
    pub vectors: Vec<Vec<f64>>,
}

impl GradientProxy {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Selected medoid indices with per-element weights γ and the achieved
/// gradient-matching residual.
#[derive(Debug, Clone, PartialEq)]
pub struct CoresetSelection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub budget: usize,
    pub residual: f64,
}

/// Proxies at the posterior mean: classify_latent(encode(x).mu) − one_hot(y).
/// The log-variance path is collapsed so selection is deterministic between
/// refreshes.
pub fn compute_proxies(params: &ModelParams, batch: &[(Vec<f64>, usize)]) -> Result<GradientProxy> {
    let mut vectors = Vec::with_capacity(batch.len());
    for (x, y) in batch {
        if *y >= params.num_classes {
            return Err(contract(format!(
                "label {y} out of range for K = {}",
                params.num_classes
            )));
        }
        let mu = params.encode(x)?.mu;
        let mut v = params.classify_latent(&mu)?;
        v[*y] -= 1.0;
        vectors.push(v);
    }
    Ok(GradientProxy { vectors })
}

/// Symmetric Euclidean distance matrix over proxies.
pub fn pairwise_distances(proxies: &GradientProxy) -> Result<Vec<Vec<f64>>> {
    if proxies.is_empty() {
        return Err(contract("pairwise_distances needs at least one proxy"));
    }
    let n = proxies.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist: f64 = proxies.vectors[i]
                .iter()
                .zip(&proxies.vectors[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    Ok(d)
}

fn similarity_matrix(dist: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d_max = dist
        .iter()
        .flat_map(|row| row.iter().cloned())
        .fold(0.0f64, f64::max);
    dist.iter()
        .map(|row| row.iter().map(|&d| d_max - d).collect())
        .collect()
}

/// Facility-location objective of a subset under a similarity matrix.
fn objective(sim: &[Vec<f64>], subset: &[usize]) -> f64 {
    sim.iter()
        .map(|row| {
            subset
                .iter()
                .map(|&j| row[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

/// Public for tests: objective value of an arbitrary index set.
pub fn facility_location_objective(proxies: &GradientProxy, subset: &[usize]) -> Result<f64> {
    let sim = similarity_matrix(&pairwise_distances(proxies)?);
    Ok(objective(&sim, subset))
}

/// Scores an arbitrary candidate index set the same way `select` scores its
/// greedy choice: cluster-size weights by nearest medoid, plus the weighted
/// gradient residual. Useful for comparing hand-picked or random subsets.
pub fn selection_for_indices(proxies: &GradientProxy, indices: &[usize]) -> Result<CoresetSelection> {
    if indices.is_empty() || indices.iter().any(|&i| i >= proxies.len()) {
        return Err(contract("candidate indices must be non-empty and in range"));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() {
        return Err(contract("candidate indices must be distinct"));
    }
    let dist = pairwise_distances(proxies)?;
    Ok(finish_selection(proxies, &dist, sorted, indices.len()))
}

fn nearest_medoid_weights(dist: &[Vec<f64>], indices: &[usize]) -> Vec<f64> {
    let mut gamma = vec![0.0; indices.len()];
    for row in dist {
        let mut best = 0;
        for (pos, &j) in indices.iter().enumerate() {
            // ties break toward the lowest candidate index, i.e. first wins
            if row[j] < row[indices[best]] {
                best = pos;
            }
        }
        gamma[best] += 1.0;
    }
    gamma
}

fn finish_selection(
    proxies: &GradientProxy,
    dist: &[Vec<f64>],
    mut indices: Vec<usize>,
    budget: usize,
) -> CoresetSelection {
    indices.sort_unstable();
    let gamma = nearest_medoid_weights(dist, &indices);
    // drop medoids that received no assignment (possible only with exact
    // duplicates both selected)
    let (indices, weights): (Vec<usize>, Vec<f64>) = indices
        .into_iter()
        .zip(gamma)
        .filter(|&(_, g)| g > 0.0)
        .unzip();
    let mut sel = CoresetSelection {
        indices,
        weights,
        budget,
        residual: 0.0,
    };
    sel.residual = weighted_gradient_residual(proxies, &sel).expect("valid selection");
    sel
}

#[derive(PartialEq)]
struct HeapEntry {
    gain: f64,
    distinct: bool,
    idx: usize,
    round: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.gain
            .partial_cmp(&other.gain)
            .unwrap()
            .then(self.distinct.cmp(&other.distinct))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy-greedy facility-location maximization. Stale gains are upper bounds
/// (submodularity), so an entry is only selected once its gain has been
/// recomputed in the current round; ties prefer candidates distinct from the
/// selected set, then the lowest index.
pub fn select(proxies: &GradientProxy, budget: usize) -> Result<CoresetSelection> {
    if budget == 0 {
        return Err(contract("coreset budget must be >= 1"));
    }
    let n = proxies.len();
    let dist = pairwise_distances(proxies)?;
    let sim = similarity_matrix(&dist);
    let target = budget.min(n);

    // best[i] = max similarity of i to the selected set so far
    let mut best = vec![0.0f64; n];
    let gain = |cand: usize, best: &[f64]| -> f64 {
        (0..n).map(|i| (sim[i][cand] - best[i]).max(0.0)).sum()
    };
    let is_distinct = |cand: usize, selected: &[usize]| -> bool {
        selected.iter().all(|&j| dist[cand][j] > 0.0)
    };

    let mut selected: Vec<usize> = Vec::with_capacity(target);
    let mut heap: BinaryHeap<HeapEntry> = (0..n)
        .map(|idx| HeapEntry {
            gain: gain(idx, &best),
            distinct: true,
            idx,
            round: 0,
        })
        .collect();
    let mut round = 0usize;
    while selected.len() < target {
        let entry = heap.pop().expect("heap holds all unselected candidates");
        if entry.round != round {
            heap.push(HeapEntry {
                gain: gain(entry.idx, &best),
                distinct: is_distinct(entry.idx, &selected),
                idx: entry.idx,
                round,
            });
            continue;
        }
        selected.push(entry.idx);
        for i in 0..n {
            best[i] = best[i].max(sim[i][entry.idx]);
        }
        round += 1;
    }
    Ok(finish_selection(proxies, &dist, selected, budget))
}

/// Reference greedy without lazy evaluation; same selection rule. Kept as an
/// independent semantics witness for `select`.
pub fn naive_select(proxies: &GradientProxy, budget: usize) -> Result<CoresetSelection> {
    if budget == 0 {
        return Err(contract("coreset budget must be >= 1"));
    }
    let n = proxies.len();
    let dist = pairwise_distances(proxies)?;
    let sim = similarity_matrix(&dist);
    let target = budget.min(n);
    let mut best = vec![0.0f64; n];
    let mut selected: Vec<usize> = Vec::new();
    let mut in_set = vec![false; n];
    for _ in 0..target {
        let mut pick: Option<(f64, bool, usize)> = None;
        for cand in 0..n {
            if in_set[cand] {
                continue;
            }
            let g: f64 = (0..n).map(|i| (sim[i][cand] - best[i]).max(0.0)).sum();
            let distinct = selected.iter().all(|&j| dist[cand][j] > 0.0);
            let better = match &pick {
                None => true,
                Some((bg, bd, _)) => g > *bg || (g == *bg && distinct && !*bd),
            };
            if better {
                pick = Some((g, distinct, cand));
            }
        }
        let (_, _, cand) = pick.unwrap();
        in_set[cand] = true;
        selected.push(cand);
        for i in 0..n {
            best[i] = best[i].max(sim[i][cand]);
        }
    }
    Ok(finish_selection(proxies, &dist, selected, budget))
}

const BRUTE_FORCE_LIMIT: usize = 15;

/// Exhaustive facility-location maximization over all subsets of the budget
/// size. Guarded to small instances; ties resolve to the lexicographically
/// smallest index set.
pub fn brute_force_select(proxies: &GradientProxy, budget: usize) -> Result<CoresetSelection> {
    if budget == 0 {
        return Err(contract("coreset budget must be >= 1"));
    }
    let n = proxies.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let dist = pairwise_distances(proxies)?;
    let sim = similarity_matrix(&dist);
    let target = budget.min(n);
    let mut best_subset: Option<(f64, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..target).collect();
    'outer: loop {
        let obj = objective(&sim, &subset);
        if best_subset.as_ref().map_or(true, |(b, _)| obj > *b) {
            best_subset = Some((obj, subset.clone()));
        }
        // advance to the next combination in lexicographic order
        let mut i = target;
        while i > 0 {
            i -= 1;
            if subset[i] < i + n - target {
                subset[i] += 1;
                for j in (i + 1)..target {
                    subset[j] = subset[j - 1] + 1;
                }
                continue 'outer;
            }
        }
        break;
    }
    let (_, winner) = best_subset.expect("at least one combination");
    Ok(finish_selection(proxies, &dist, winner, budget))
}

/// ‖Σ_i proxy_i − Σ_j γ_j proxy_j‖ over the candidate set.
pub fn weighted_gradient_residual(
    proxies: &GradientProxy,
    selection: &CoresetSelection,
) -> Result<f64> {
    let k = proxies.vectors.first().map_or(0, |v| v.len());
    let mut full = vec![0.0; k];
    for v in &proxies.vectors {
        for (a, b) in full.iter_mut().zip(v) {
            *a += b;
        }
    }
    let mut approx = vec![0.0; k];
    for (&j, &g) in selection.indices.iter().zip(&selection.weights) {
        let v = proxies
            .vectors
            .get(j)
            .ok_or_else(|| contract(format!("selection index {j} out of range")))?;
        for (a, b) in approx.iter_mut().zip(v) {
            *a += g * b;
        }
    }
    let diff: Vec<f64> = full.iter().zip(&approx).map(|(a, b)| a - b).collect();
    Ok(l2_norm(&diff))
}

/// Writes a selection as a text record set: a header line with budget and
/// residual, then one `index<TAB>gamma` line per selected element.
pub fn save_selection(selection: &CoresetSelection, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(
        f,
        "# craig budget={} residual={}",
        selection.budget, selection.residual
    )?;
    for (&idx, &g) in selection.indices.iter().zip(&selection.weights) {
        writeln!(f, "{idx}\t{g}")?;
    }
    Ok(())
}

pub fn load_selection(path: &Path) -> Result<CoresetSelection> {
    let f = BufReader::new(File::open(path)?);
    let mut lines = f.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        offset: 0,
        detail: "empty selection file".to_string(),
    })??;
    let parse_field = |name: &str| -> Result<f64> {
        header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix(&format!("{name}=")))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: 0,
                detail: format!("selection header missing {name}="),
            })
    };
    let budget = parse_field("budget")? as usize;
    let residual = parse_field("residual")?;
    let mut indices = Vec::new();
    let mut weights = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let bad = |detail: String| Error::Parse { offset: 0, detail };
        let idx: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad selection line `{line}`")))?;
        let g: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad selection line `{line}`")))?;
        indices.push(idx);
        weights.push(g);
    }
    Ok(CoresetSelection {
        indices,
        weights,
        budget,
        residual,
    })
}

/// Writes a raw proxy matrix: u32 magic, u32 rows, u32 cols, then row-major
/// little-endian f64 entries.
pub fn save_proxy_matrix(proxies: &GradientProxy, path: &Path) -> Result<()> {
    let rows = proxies.len();
    let cols = proxies.vectors.first().map_or(0, |v| v.len());
    let mut w = ByteWriter::new(BufWriter::new(File::create(path)?));
    w.write_u32(PROXY_MAGIC)?;
    w.write_u32(rows as u32)?;
    w.write_u32(cols as u32)?;
    for v in &proxies.vectors {
        w.write_f64_slice(v)?;
    }
    Ok(())
}

pub fn load_proxy_matrix(path: &Path) -> Result<GradientProxy> {
    let mut r = ByteReader::new(BufReader::new(File::open(path)?));
    let magic = r.read_u32("proxy magic")?;
    if magic != PROXY_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            detail: format!("bad proxy matrix magic {magic:#x}"),
        });
    }
    let rows = r.read_u32("rows")? as usize;
    let cols = r.read_u32("cols")? as usize;
    let mut vectors = Vec::with_capacity(rows);
    for _ in 0..rows {
        vectors.push(r.read_f64_vec(cols, "proxy row")?);
    }
    r.expect_eof()?;
    Ok(GradientProxy { vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{zero_net, ModelConfig, ModelParams};
    use crate::numkernel::{rng_stream, softmax};
    use rand::Rng;

    fn random_proxies(n: usize, k: usize, seed: u64) -> GradientProxy {
        let mut rng = rng_stream(seed, 0);
        let vectors = (0..n)
            .map(|_| {
                let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let mut p = softmax(&logits).unwrap();
                let y = rng.gen_range(0..k);
                p[y] -= 1.0;
                p
            })
            .collect();
        GradientProxy { vectors }
    }

    #[test]
    fn proxies_are_softmax_minus_onehot() {
        let mut rng = rng_stream(1, 0);
        let mut m = ModelParams::new(&ModelConfig::default(), &mut rng).unwrap();
        zero_net(&mut m.energy_net);
        let batch = vec![(vec![0.1; 16], 2usize)];
        let p = compute_proxies(&m, &batch).unwrap();
        assert_eq!(p.vectors[0], vec![0.25, 0.25, -0.75, 0.25]);

        // proxy rows sum to zero
        let m2 = ModelParams::new(&ModelConfig::default(), &mut rng).unwrap();
        let batch: Vec<(Vec<f64>, usize)> = (0..6)
            .map(|i| (vec![(i as f64) * 0.3 - 1.0; 16], i % 4))
            .collect();
        let p = compute_proxies(&m2, &batch).unwrap();
        for v in &p.vectors {
            assert!(v.iter().sum::<f64>().abs() < 1e-10);
        }
        assert!(compute_proxies(&m2, &[(vec![0.0; 16], 99)]).is_err());
    }

    #[test]
    fn proxies_match_cross_entropy_finite_differences() {
        // proxy = ∂/∂logits [−log softmax(logits)[y]]
        let mut rng = rng_stream(2, 0);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y = rng.gen_range(0..4);
            let mut proxy = softmax(&logits).unwrap();
            proxy[y] -= 1.0;
            let loss = |l: &[f64]| -> f64 {
                let p = softmax(l).unwrap();
                -p[y].ln()
            };
            let h = 1e-6;
            for k in 0..4 {
                let mut lp = logits.clone();
                lp[k] += h;
                let mut lm = logits.clone();
                lm[k] -= h;
                let fd = (loss(&lp) - loss(&lm)) / (2.0 * h);
                assert!((fd - proxy[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn distance_matrix_properties() {
        let p = random_proxies(6, 4, 3);
        let d = pairwise_distances(&p).unwrap();
        for i in 0..6 {
            assert_eq!(d[i][i], 0.0);
            for j in 0..6 {
                assert_eq!(d[i][j], d[j][i]);
                for k in 0..6 {
                    assert!(d[i][j] <= d[i][k] + d[k][j] + 1e-12);
                }
            }
        }
        // identical proxies -> zero matrix
        let same = GradientProxy {
            vectors: vec![vec![0.5, -0.5]; 3],
        };
        let d0 = pairwise_distances(&same).unwrap();
        assert!(d0.iter().flatten().all(|&v| v == 0.0));
        // single-coordinate difference
        let two = GradientProxy {
            vectors: vec![vec![0.0, 0.0], vec![0.25, 0.0]],
        };
        assert!((pairwise_distances(&two).unwrap()[0][1] - 0.25).abs() < 1e-15);
        // against compensated recomputation
        let mut rng = rng_stream(4, 0);
        let p = random_proxies(6, 4, 5);
        let d = pairwise_distances(&p).unwrap();
        for _ in 0..20 {
            let (i, j) = (rng.gen_range(0..6), rng.gen_range(0..6));
            let mut s = 0.0f64;
            let mut c = 0.0f64;
            for (a, b) in p.vectors[i].iter().zip(&p.vectors[j]) {
                let term = (a - b) * (a - b) - c;
                let t = s + term;
                c = (t - s) - term;
                s = t;
            }
            assert!((d[i][j] - s.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn full_budget_is_identity_selection() {
        let p = random_proxies(7, 3, 6);
        let sel = select(&p, 7).unwrap();
        assert_eq!(sel.indices, (0..7).collect::<Vec<_>>());
        assert!(sel.weights.iter().all(|&g| g == 1.0));
        assert_eq!(sel.residual, 0.0);
    }

    #[test]
    fn duplicate_candidates_collapse() {
        let p = GradientProxy {
            vectors: vec![vec![0.3, -0.3], vec![0.3, -0.3]],
        };
        let sel = select(&p, 1).unwrap();
        assert_eq!(sel.indices.len(), 1);
        assert_eq!(sel.weights, vec![2.0]);
        assert_eq!(sel.residual, 0.0);
    }

    #[test]
    fn duplicates_not_selected_while_distinct_remain() {
        let p = GradientProxy {
            vectors: vec![
                vec![0.0, 0.0],
                vec![0.0, 0.0], // dup of 0
                vec![1.0, 0.0],
                vec![0.0, 1.0],
            ],
        };
        let sel = select(&p, 3).unwrap();
        assert!(!(sel.indices.contains(&0) && sel.indices.contains(&1)));
    }

    #[test]
    fn greedy_matches_naive_reference() {
        for seed in 0..30u64 {
            let n = 4 + (seed as usize % 9);
            let p = random_proxies(n, 3, 100 + seed);
            for budget in 1..=n.min(5) {
                let a = select(&p, budget).unwrap();
                let b = naive_select(&p, budget).unwrap();
                assert_eq!(a, b, "seed {seed} budget {budget}");
            }
        }
    }

    #[test]
    fn greedy_trajectory_is_monotone_with_diminishing_gains() {
        for seed in 0..10u64 {
            let p = random_proxies(9, 3, 200 + seed);
            let sim = similarity_matrix(&pairwise_distances(&p).unwrap());
            let sel = select(&p, 5).unwrap();
            // replay the greedy order via prefix objectives
            let full = naive_select(&p, 5).unwrap();
            let mut prev_obj = 0.0;
            let mut prev_gain = f64::INFINITY;
            let mut prefix: Vec<usize> = Vec::new();
            // naive_select sorts indices; recover greedy order by rerunning
            let _ = (sel, full);
            let mut best = vec![0.0f64; 9];
            for _ in 0..5 {
                let mut bi = usize::MAX;
                let mut bg = f64::NEG_INFINITY;
                for c in 0..9 {
                    if prefix.contains(&c) {
                        continue;
                    }
                    let g: f64 = (0..9).map(|i| (sim[i][c] - best[i]).max(0.0)).sum();
                    if g > bg {
                        bg = g;
                        bi = c;
                    }
                }
                assert!(bg <= prev_gain + 1e-9, "gain increased along trajectory");
                prev_gain = bg;
                prefix.push(bi);
                for i in 0..9 {
                    best[i] = best[i].max(sim[i][bi]);
                }
                let obj = objective(&sim, &prefix);
                assert!(obj >= prev_obj - 1e-12);
                prev_obj = obj;
            }
        }
    }

    #[test]
    fn brute_force_basics_and_dominance() {
        let p = random_proxies(8, 3, 7);
        // budget == n -> identical to select
        assert_eq!(
            brute_force_select(&p, 8).unwrap(),
            select(&p, 8).unwrap()
        );
        let single = GradientProxy {
            vectors: vec![vec![0.1, -0.1]],
        };
        let s = brute_force_select(&single, 1).unwrap();
        assert_eq!((s.indices.clone(), s.weights.clone()), (vec![0], vec![1.0]));
        // definitional dominance over 100 random instances
        for seed in 0..100u64 {
            let p = random_proxies(8, 3, 300 + seed);
            let g = select(&p, 3).unwrap();
            let b = brute_force_select(&p, 3).unwrap();
            let og = facility_location_objective(&p, &g.indices).unwrap();
            let ob = facility_location_objective(&p, &b.indices).unwrap();
            assert!(ob >= og - 1e-9, "seed {seed}: brute {ob} < greedy {og}");
        }
        // enumeration guard
        let big = random_proxies(16, 3, 9);
        assert!(matches!(
            brute_force_select(&big, 2),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn greedy_achieves_submodular_guarantee() {
        let ratio_floor = 1.0 - (-1.0f64).exp();
        for seed in 0..40u64 {
            let p = random_proxies(10, 3, 400 + seed);
            let g = select(&p, 3).unwrap();
            let b = brute_force_select(&p, 3).unwrap();
            let og = facility_location_objective(&p, &g.indices).unwrap();
            let ob = facility_location_objective(&p, &b.indices).unwrap();
            assert!(og >= ratio_floor * ob - 1e-9, "seed {seed}: {og} vs {ob}");
        }
    }

    #[test]
    fn weights_sum_to_candidate_count() {
        for seed in 0..20u64 {
            let n = 5 + seed as usize % 8;
            let p = random_proxies(n, 4, 500 + seed);
            let sel = select(&p, 3.min(n)).unwrap();
            let total: f64 = sel.weights.iter().sum();
            assert_eq!(total, n as f64);
            assert!(sel.weights.iter().all(|&g| g > 0.0));
            let mut sorted = sel.indices.clone();
            sorted.dedup();
            assert_eq!(sorted.len(), sel.indices.len());
        }
    }

    #[test]
    fn residual_trivial_cases_and_random_subset_comparison() {
        let p = random_proxies(9, 3, 11);
        let full = select(&p, 9).unwrap();
        assert_eq!(weighted_gradient_residual(&p, &full).unwrap(), 0.0);

        let same = GradientProxy {
            vectors: vec![vec![0.2, -0.2]; 5],
        };
        let one = CoresetSelection {
            indices: vec![0],
            weights: vec![5.0],
            budget: 1,
            residual: 0.0,
        };
        assert!(weighted_gradient_residual(&same, &one).unwrap() < 1e-12);

        // greedy residual <= mean residual of random subsets with the same
        // weighting rule
        let mut rng = rng_stream(12, 0);
        let dist = pairwise_distances(&p).unwrap();
        let greedy = select(&p, 3).unwrap();
        let mut acc = 0.0;
        for _ in 0..100 {
            let mut idxs: Vec<usize> = (0..9).collect();
            for i in (1..9).rev() {
                let j = rng.gen_range(0..=i);
                idxs.swap(i, j);
            }
            let mut subset = idxs[..3].to_vec();
            subset.sort_unstable();
            let gamma = nearest_medoid_weights(&dist, &subset);
            let sel = CoresetSelection {
                indices: subset,
                weights: gamma,
                budget: 3,
                residual: 0.0,
            };
            acc += weighted_gradient_residual(&p, &sel).unwrap();
        }
        assert!(greedy.residual <= acc / 100.0 + 1e-12);
    }

    #[test]
    fn selection_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("selection.tsv");
        let p = random_proxies(6, 3, 13);
        let sel = select(&p, 2).unwrap();
        save_selection(&sel, &path).unwrap();
        let loaded = load_selection(&path).unwrap();
        assert_eq!(sel, loaded);
    }

    #[test]
    fn proxy_matrix_roundtrip_and_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proxies.bin");
        let p = random_proxies(4, 3, 14);
        save_proxy_matrix(&p, &path).unwrap();
        let loaded = load_proxy_matrix(&path).unwrap();
        assert_eq!(p.vectors, loaded.vectors);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0x1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_proxy_matrix(&path), Err(Error::Parse { .. })));
    }
}
