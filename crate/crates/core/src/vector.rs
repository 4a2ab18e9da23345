//! Obfuscation of bounded feature vectors.
//!
//! A [`BoundedVector`] carries a valid range per element. Distances are
//! normalized per element by the range width and averaged, so any two vectors
//! over the same ranges are between 0 and 1 apart. [`laplace_vector_obfuscate`]
//! then guarantees that the output densities for secrets `X1` and `X2` differ
//! by at most `exp(epsilon * vector_distance(X1, X2))`.
//!
//! The k-same baseline ([`ksame_cluster`], [`ksame_obfuscate`]) and
//! [`intersection_attack`] show how cluster averaging fails under two
//! independent releases.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{laplace_log_density, sample_laplace, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let r = ValueRange { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidRange(format!(
                "[{}, {}] must be finite with min < max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

impl From<[f64; 2]> for ValueRange {
    fn from([min, max]: [f64; 2]) -> Self {
        ValueRange { min, max }
    }
}

impl From<ValueRange> for [f64; 2] {
    fn from(r: ValueRange) -> Self {
        [r.min, r.max]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedVector {
    values: Vec<f64>,
    ranges: Vec<ValueRange>,
}

impl BoundedVector {
    /// Validates the ranges and clamps each value into its range.
    pub fn new(values: Vec<f64>, ranges: Vec<ValueRange>) -> Result<Self> {
        if values.is_empty() || values.len() != ranges.len() {
            return Err(Error::InvalidInput(format!(
                "vector has {} values but {} ranges",
                values.len(),
                ranges.len()
            )));
        }
        for r in &ranges {
            r.validate()?;
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {v}")));
        }
        let values = values
            .into_iter()
            .zip(&ranges)
            .map(|(v, r)| r.clamp(v))
            .collect();
        Ok(BoundedVector { values, ranges })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ranges(&self) -> &[ValueRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_compatible(&self, other: &BoundedVector) -> Result<()> {
        if self.ranges != other.ranges {
            return Err(Error::InvalidInput(
                "vectors must share length and per-element ranges".into(),
            ));
        }
        Ok(())
    }
}

/// `|x - x'| / (max - min)`.
pub fn element_distance(x: f64, x_prime: f64, range: &ValueRange) -> Result<f64> {
    range.validate()?;
    if !range.contains(x) || !range.contains(x_prime) {
        return Err(Error::InvalidInput(format!(
            "values {x} and {x_prime} must lie in [{}, {}]",
            range.min, range.max
        )));
    }
    Ok((x - x_prime).abs() / range.width())
}

/// Mean of the element distances.
pub fn vector_distance(a: &BoundedVector, b: &BoundedVector) -> Result<f64> {
    a.check_compatible(b)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .zip(&a.ranges)
        .map(|((x, y), r)| (x - y).abs() / r.width())
        .sum();
    Ok(sum / a.len() as f64)
}

/// Per-element Laplace scales `n * (max - min) / epsilon`.
pub fn laplace_vector_scales(ranges: &[ValueRange], epsilon: f64) -> Vec<f64> {
    let n = ranges.len() as f64;
    ranges.iter().map(|r| n * r.width() / epsilon).collect()
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "epsilon",
            format!("must be positive and finite, got {epsilon}"),
        ))
    }
}

/// The noisy release before clamping.
pub fn laplace_vector_release(x: &BoundedVector, epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    let mut rng = stream_rng(seed, 0);
    Ok(x.values
        .iter()
        .zip(laplace_vector_scales(&x.ranges, epsilon))
        .map(|(v, scale)| v + sample_laplace(&mut rng, scale))
        .collect())
}

/// Adds per-element Laplace noise and clamps the result into the ranges.
pub fn laplace_vector_obfuscate(
    x: &BoundedVector,
    epsilon: f64,
    seed: u64,
) -> Result<BoundedVector> {
    let raw = laplace_vector_release(x, epsilon, seed)?;
    BoundedVector::new(raw, x.ranges.clone())
}

/// Log density of observing the pre-clamp `release` when the secret is `x`.
pub fn release_log_density(x: &BoundedVector, release: &[f64], epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if release.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "release has {} values, secret has {}",
            release.len(),
            x.len()
        )));
    }
    Ok(x.values
        .iter()
        .zip(release)
        .zip(laplace_vector_scales(&x.ranges, epsilon))
        .map(|((&mu, &r), scale)| laplace_log_density(r, mu, scale))
        .sum())
}

/// Outcome of comparing the density ratio at one release point with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioCheck {
    /// `ln f(R | X1) - ln f(R | X2)`.
    pub log_ratio: f64,
    /// `epsilon * vector_distance(X1, X2)`.
    pub log_bound: f64,
}

impl RatioCheck {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.log_ratio.exp() <= self.log_bound.exp() + tolerance
    }
}

/// Density ratio of a release under two secrets against `exp(epsilon * d)`.
pub fn density_ratio_check(
    x1: &BoundedVector,
    x2: &BoundedVector,
    release: &[f64],
    epsilon: f64,
) -> Result<RatioCheck> {
    let d = vector_distance(x1, x2)?;
    Ok(RatioCheck {
        log_ratio: release_log_density(x1, release, epsilon)?
            - release_log_density(x2, release, epsilon)?,
        log_bound: epsilon * d,
    })
}

/// `(d, exp(epsilon * d))` for each distance, to read off the guarantee.
pub fn guarantee_table(epsilon: f64, distances: &[f64]) -> Vec<(f64, f64)> {
    distances
        .iter()
        .map(|&d| (d, (epsilon * d).exp()))
        .collect()
}

/// Result of k-same clustering: a partition of vector indices into clusters
/// of at least `k` members, with the element-wise mean of each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub clusters: Vec<Vec<usize>>,
    pub centroids: Vec<BoundedVector>,
}

impl ClusterAssignment {
    /// Cluster number of every index.
    pub fn membership(&self) -> Vec<usize> {
        let m = self.clusters.iter().map(Vec::len).sum();
        let mut out = vec![0; m];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                out[i] = c;
            }
        }
        out
    }
}

fn centroid(vectors: &[BoundedVector], members: &[usize]) -> BoundedVector {
    let first = &vectors[members[0]];
    let count = members.len() as f64;
    let values = (0..first.len())
        .map(|e| members.iter().map(|&i| vectors[i].values[e]).sum::<f64>() / count)
        .collect();
    BoundedVector::new(values, first.ranges.clone()).expect("mean of in-range values is in range")
}

/// Greedy k-same clustering.
///
/// The unassigned vector with the smallest index seeds a cluster together with
/// its `k - 1` nearest unassigned neighbours (ties to the lower index). When
/// fewer than `k` vectors remain they join the last cluster.
pub fn ksame_cluster(vectors: &[BoundedVector], k: usize) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if vectors.len() < k {
        return Err(Error::InvalidInput(format!(
            "need at least k = {k} vectors, got {}",
            vectors.len()
        )));
    }
    for v in &vectors[1..] {
        vectors[0].check_compatible(v)?;
    }
    let mut unassigned: BTreeSet<usize> = (0..vectors.len()).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    while unassigned.len() >= k {
        let seed = unassigned.pop_first().expect("non-empty");
        let mut neighbours: Vec<(f64, usize)> = unassigned
            .iter()
            .map(|&i| Ok((vector_distance(&vectors[seed], &vectors[i])?, i)))
            .collect::<Result<_>>()?;
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut members = vec![seed];
        for &(_, i) in neighbours.iter().take(k - 1) {
            unassigned.remove(&i);
            members.push(i);
        }
        members.sort_unstable();
        clusters.push(members);
    }
    if !unassigned.is_empty() {
        let last = clusters.last_mut().expect("m >= k yields a cluster");
        last.extend(unassigned);
        last.sort_unstable();
    }
    let centroids = clusters.iter().map(|c| centroid(vectors, c)).collect();
    Ok(ClusterAssignment {
        k,
        clusters,
        centroids,
    })
}

/// Replaces every vector with the centroid of its k-same cluster.
pub fn ksame_obfuscate(vectors: &[BoundedVector], k: usize) -> Result<Vec<BoundedVector>> {
    let assignment = ksame_cluster(vectors, k)?;
    Ok(assignment
        .membership()
        .into_iter()
        .map(|c| assignment.centroids[c].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    /// Threshold below which an intersection breaks the k-same guarantee.
    pub k: usize,
    /// Identity and size of its intersected candidate set.
    pub intersections: Vec<(u64, usize)>,
    pub min: usize,
    pub mean: f64,
    pub violations: usize,
}

/// Intersects the cluster of each shared identity across two independently
/// clustered galleries.
///
/// `ids_a[i]` is the identity of vector `i` of the first gallery, likewise for
/// `ids_b`. An identity's candidate set in one release is the set of
/// identities in its cluster.
pub fn intersection_attack(
    a: &ClusterAssignment,
    ids_a: &[u64],
    b: &ClusterAssignment,
    ids_b: &[u64],
    shared: &[u64],
) -> Result<AttackReport> {
    fn candidate_sets(
        assignment: &ClusterAssignment,
        ids: &[u64],
    ) -> Result<BTreeMap<u64, BTreeSet<u64>>> {
        let m: usize = assignment.clusters.iter().map(Vec::len).sum();
        if ids.len() != m {
            return Err(Error::InvalidInput(format!(
                "{} identity labels for {m} clustered vectors",
                ids.len()
            )));
        }
        let mut out = BTreeMap::new();
        for members in &assignment.clusters {
            let set: BTreeSet<u64> = members.iter().map(|&i| ids[i]).collect();
            for &i in members {
                out.insert(ids[i], set.clone());
            }
        }
        Ok(out)
    }
    if shared.is_empty() {
        return Err(Error::InvalidInput("no shared identities given".into()));
    }
    let sets_a = candidate_sets(a, ids_a)?;
    let sets_b = candidate_sets(b, ids_b)?;
    let k = a.k.min(b.k);
    let mut intersections = Vec::with_capacity(shared.len());
    for id in shared {
        let (Some(sa), Some(sb)) = (sets_a.get(id), sets_b.get(id)) else {
            return Err(Error::InvalidInput(format!(
                "identity {id} is missing from one of the galleries"
            )));
        };
        intersections.push((*id, sa.intersection(sb).count()));
    }
    let min = intersections.iter().map(|&(_, s)| s).min().unwrap_or(0);
    let mean =
        intersections.iter().map(|&(_, s)| s as f64).sum::<f64>() / intersections.len() as f64;
    let violations = intersections.iter().filter(|&&(_, s)| s < k).count();
    Ok(AttackReport {
        k,
        intersections,
        min,
        mean,
        violations,
    })
}

/// On-disk vector collection: `{"ranges": [[min, max], ...], "vectors": [[...], ...]}`
/// with optional identity labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<ValueRange>>,
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<u64>>,
}

impl VectorFile {
    pub fn from_bounded(vectors: &[BoundedVector], ids: Option<Vec<u64>>) -> Self {
        VectorFile {
            ranges: vectors.first().map(|v| v.ranges.clone()),
            vectors: vectors.iter().map(|v| v.values.clone()).collect(),
            ids,
        }
    }

    /// Checks the file's internal consistency; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.vectors.is_empty() {
            return Err(Error::InvalidInput("`vectors` must not be empty".into()));
        }
        let n = self.vectors[0].len();
        if n == 0 {
            return Err(Error::InvalidInput("`vectors[0]` must not be empty".into()));
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "`vectors[{i}]` has {} elements, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "`vectors[{i}]` has a non-finite value"
                )));
            }
        }
        if let Some(ranges) = &self.ranges {
            if ranges.len() != n {
                return Err(Error::InvalidInput(format!(
                    "`ranges` has {} entries, vectors have {n} elements",
                    ranges.len()
                )));
            }
            for (i, r) in ranges.iter().enumerate() {
                r.validate().map_err(|_| {
                    Error::InvalidInput(format!("`ranges[{i}]` must satisfy min < max"))
                })?;
            }
        }
        if let Some(ids) = &self.ids {
            if ids.len() != self.vectors.len() {
                return Err(Error::InvalidInput(format!(
                    "`ids` has {} entries for {} vectors",
                    ids.len(),
                    self.vectors.len()
                )));
            }
        }
        Ok(())
    }

    /// Bounded vectors; requires `ranges`.
    pub fn bounded(&self) -> Result<Vec<BoundedVector>> {
        self.validate()?;
        let ranges = self
            .ranges
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("missing field `ranges`".into()))?;
        self.vectors
            .iter()
            .map(|v| BoundedVector::new(v.clone(), ranges.clone()))
            .collect()
    }

    /// Identity labels, defaulting to vector positions.
    pub fn identities(&self) -> Vec<u64> {
        self.ids
            .clone()
            .unwrap_or_else(|| (0..self.vectors.len() as u64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> Vec<ValueRange> {
        vec![ValueRange::new(0.0, 1.0).unwrap(); n]
    }

    fn bv(values: &[f64]) -> BoundedVector {
        BoundedVector::new(values.to_vec(), unit(values.len())).unwrap()
    }

    #[test]
    fn element_distance_examples() {
        let r = ValueRange::new(0.0, 10.0).unwrap();
        assert_eq!(element_distance(2.0, 7.0, &r).unwrap(), 0.5);
        assert_eq!(element_distance(4.0, 4.0, &r).unwrap(), 0.0);
        assert_eq!(element_distance(0.0, 10.0, &r).unwrap(), 1.0);
        let degenerate = ValueRange { min: 1.0, max: 1.0 };
        assert!(matches!(
            element_distance(1.0, 1.0, &degenerate),
            Err(Error::InvalidRange(_))
        ));
    }

    #[test]
    fn vector_distance_examples() {
        let ranges = vec![
            ValueRange::new(0.0, 2.0).unwrap(),
            ValueRange::new(-5.0, 5.0).unwrap(),
        ];
        let a = BoundedVector::new(vec![0.0, 0.0], ranges.clone()).unwrap();
        let b = BoundedVector::new(vec![1.0, 1.0], ranges.clone()).unwrap();
        assert!((vector_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(vector_distance(&a, &a).unwrap(), 0.0);
        let lo = BoundedVector::new(vec![0.0, -5.0], ranges.clone()).unwrap();
        let hi = BoundedVector::new(vec![2.0, 5.0], ranges).unwrap();
        assert_eq!(vector_distance(&lo, &hi).unwrap(), 1.0);
        assert!(vector_distance(&a, &bv(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn construction_clamps_and_validates() {
        let v = BoundedVector::new(vec![-1.0, 0.5, 3.0], unit(3)).unwrap();
        assert_eq!(v.values(), &[0.0, 0.5, 1.0]);
        assert!(BoundedVector::new(vec![0.0], unit(2)).is_err());
        assert!(BoundedVector::new(vec![], vec![]).is_err());
        assert!(BoundedVector::new(vec![f64::NAN], unit(1)).is_err());
    }

    #[test]
    fn laplace_scale_example() {
        let ranges = vec![ValueRange::new(-1.0, 1.0).unwrap(); 100];
        for s in laplace_vector_scales(&ranges, 400.0) {
            assert_eq!(s, 0.5);
        }
    }

    #[test]
    fn huge_budget_leaves_vector_unchanged() {
        let x = bv(&[0.1, 0.5, 0.9, 0.3]);
        let out = laplace_vector_obfuscate(&x, 1e12, 3).unwrap();
        for (a, b) in out.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn ratio_check_on_sampled_releases() {
        let x1 = bv(&[0.2, 0.9]);
        let x2 = bv(&[0.7, 0.1]);
        for seed in 0..200 {
            let r = laplace_vector_release(&x1, 3.0, seed).unwrap();
            assert!(density_ratio_check(&x1, &x2, &r, 3.0).unwrap().holds(1e-9));
            assert!(density_ratio_check(&x2, &x1, &r, 3.0).unwrap().holds(1e-9));
        }
    }

    #[test]
    fn obfuscation_is_seeded() {
        let x = bv(&[0.5; 8]);
        let a = laplace_vector_obfuscate(&x, 2.0, 1).unwrap();
        assert_eq!(a, laplace_vector_obfuscate(&x, 2.0, 1).unwrap());
        assert_ne!(a, laplace_vector_obfuscate(&x, 2.0, 2).unwrap());
        assert!(laplace_vector_obfuscate(&x, 0.0, 1).is_err());
    }

    #[test]
    fn ksame_identical_vectors() {
        let vs = vec![bv(&[0.3, 0.6]); 4];
        let a = ksame_cluster(&vs, 2).unwrap();
        assert_eq!(a.clusters, vec![vec![0, 1], vec![2, 3]]);
        for c in &a.centroids {
            assert_eq!(c, &vs[0]);
        }
        assert_eq!(ksame_obfuscate(&vs, 2).unwrap(), vs);
    }

    #[test]
    fn ksame_pairs_separated_clusters() {
        let vs = vec![
            bv(&[0.0, 0.0]),
            bv(&[0.9, 0.9]),
            bv(&[0.01, 0.01]),
            bv(&[0.91, 0.91]),
        ];
        let a = ksame_cluster(&vs, 2).unwrap();
        assert_eq!(a.clusters, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn ksame_merges_leftovers() {
        let vs = vec![bv(&[0.0]), bv(&[0.5]), bv(&[1.0])];
        let a = ksame_cluster(&vs, 2).unwrap();
        assert_eq!(a.clusters, vec![vec![0, 1, 2]]);
        assert!(ksame_cluster(&vs, 4).is_err());
    }

    #[test]
    fn ksame_averages_pairs() {
        let out = ksame_obfuscate(&[bv(&[0.0, 0.0]), bv(&[1.0, 1.0])], 2).unwrap();
        assert_eq!(out, vec![bv(&[0.5, 0.5]), bv(&[0.5, 0.5])]);
    }

    #[test]
    fn attack_on_identical_assignments_finds_nothing() {
        let vs: Vec<_> = (0..6).map(|i| bv(&[i as f64 / 10.0])).collect();
        let a = ksame_cluster(&vs, 3).unwrap();
        let ids: Vec<u64> = (0..6).collect();
        let report = intersection_attack(&a, &ids, &a, &ids, &ids).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.min >= 3);
    }

    #[test]
    fn attack_isolates_identity() {
        // Identity 7 is clustered with {1, 2} in one release and {3, 4} in the other.
        let a = ClusterAssignment {
            k: 3,
            clusters: vec![vec![0, 1, 2]],
            centroids: vec![bv(&[0.0])],
        };
        let b = a.clone();
        let report = intersection_attack(&a, &[7, 1, 2], &b, &[7, 3, 4], &[7]).unwrap();
        assert_eq!(report.intersections, vec![(7, 1)]);
        assert_eq!(report.violations, 1);
        assert!(intersection_attack(&a, &[7, 1, 2], &b, &[7, 3, 4], &[9]).is_err());
    }

    #[test]
    fn vector_file_round_trip_and_validation() {
        let json = r#"{"ranges": [[0, 1], [-1, 1]], "vectors": [[0.5, 0.0], [1.0, -1.0]]}"#;
        let file: VectorFile = serde_json::from_str(json).unwrap();
        let vs = file.bounded().unwrap();
        assert_eq!(vs.len(), 2);
        let back = serde_json::to_string(&VectorFile::from_bounded(&vs, None)).unwrap();
        assert_eq!(serde_json::from_str::<VectorFile>(&back).unwrap(), file);

        let ragged: VectorFile = serde_json::from_str(r#"{"vectors": [[1, 2], [3]]}"#).unwrap();
        assert!(ragged
            .validate()
            .unwrap_err()
            .to_string()
            .contains("vectors[1]"));
        let no_ranges: VectorFile = serde_json::from_str(r#"{"vectors": [[1]]}"#).unwrap();
        assert!(no_ranges
            .bounded()
            .unwrap_err()
            .to_string()
            .contains("ranges"));
    }

    fn arb_triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..10).prop_flat_map(|n| {
            let v = || prop::collection::vec(0.0f64..=1.0, n);
            (v(), v(), v())
        })
    }

    proptest! {
        #[test]
        fn distance_is_a_metric((a, b, c) in arb_triple()) {
            let (a, b, c) = (bv(&a), bv(&b), bv(&c));
            let ab = vector_distance(&a, &b).unwrap();
            let ba = vector_distance(&b, &a).unwrap();
            let bc = vector_distance(&b, &c).unwrap();
            let ac = vector_distance(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn obfuscation_respects_ranges(values in prop::collection::vec(-3.0f64..3.0, 1..12), seed: u64) {
            let ranges = vec![ValueRange::new(-1.0, 2.0).unwrap(); values.len()];
            let x = BoundedVector::new(values, ranges.clone()).unwrap();
            let out = laplace_vector_obfuscate(&x, 0.5, seed).unwrap();
            prop_assert!(out.values().iter().zip(&ranges).all(|(v, r)| r.contains(*v)));
        }

        #[test]
        fn ksame_outputs_are_cluster_means(
            points in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 2..15),
            k in 1usize..5,
        ) {
            prop_assume!(points.len() >= k);
            let vs: Vec<_> = points.iter().map(|p| bv(p)).collect();
            let a = ksame_cluster(&vs, k).unwrap();
            let out = ksame_obfuscate(&vs, k).unwrap();
            let mut seen = vec![false; vs.len()];
            for members in &a.clusters {
                prop_assert!(members.len() >= k);
                for &i in members {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                    prop_assert_eq!(&out[i], &out[members[0]]);
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            let distinct: BTreeSet<Vec<u64>> = out
                .iter()
                .map(|v| v.values().iter().map(|x| x.to_bits()).collect())
                .collect();
            prop_assert!(distinct.len() <= vs.len().div_ceil(k));
        }
    }
}
