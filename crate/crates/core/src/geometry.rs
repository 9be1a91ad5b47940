//! Two-layer array layout: subarray origins plus per-subarray antenna offsets.
//!
//! All lengths are in wavelengths. A subarray `s` starts at `q[s]` and its
//! antennas sit at `q[s] + d[s][a]`. Layouts are plain data; feasibility is a
//! predicate evaluated on demand so that infeasible PSO particles can still be
//! represented and penalized.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const WAVELENGTH: f64 = 1.0;
pub const HALF_WAVELENGTH: f64 = 0.5 * WAVELENGTH;
pub const QUARTER_WAVELENGTH: f64 = 0.25 * WAVELENGTH;

/// Relative tolerance used when validating architecture invariants. Feasibility
/// checks on layouts never use it.
const GEOMETRY_TOL: f64 = 1e-12;

/// Static geometry of a two-layer movable array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayArchitecture {
    num_subarrays: usize,
    antennas_per_subarray: usize,
    region_length: f64,
    subarray_length: f64,
    alpha: f64,
}

impl ArrayArchitecture {
    /// Builds an architecture with `subarray_length = alpha * region_length / num_subarrays`.
    pub fn new(
        num_subarrays: usize,
        antennas_per_subarray: usize,
        region_length: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if num_subarrays == 0 {
            return Err(Error::InvalidGeometry("num_subarrays must be positive".into()));
        }
        let subarray_length = alpha * region_length / num_subarrays as f64;
        Self::build(
            num_subarrays,
            antennas_per_subarray,
            region_length,
            subarray_length,
        )
    }

    /// Builds an architecture from an explicit subarray length; `alpha` is derived.
    pub fn with_subarray_length(
        num_subarrays: usize,
        antennas_per_subarray: usize,
        region_length: f64,
        subarray_length: f64,
    ) -> Result<Self> {
        Self::build(
            num_subarrays,
            antennas_per_subarray,
            region_length,
            subarray_length,
        )
    }

    /// The rigid-subarray special case: each subarray is exactly `M_A` half
    /// wavelengths long, so the antenna offsets are pinned to the half-wavelength grid.
    pub fn array_wise(
        num_subarrays: usize,
        antennas_per_subarray: usize,
        region_length: f64,
    ) -> Result<Self> {
        Self::build(
            num_subarrays,
            antennas_per_subarray,
            region_length,
            antennas_per_subarray as f64 * HALF_WAVELENGTH,
        )
    }

    fn build(
        num_subarrays: usize,
        antennas_per_subarray: usize,
        region_length: f64,
        mut subarray_length: f64,
    ) -> Result<Self> {
        if num_subarrays == 0 || antennas_per_subarray == 0 {
            return Err(Error::InvalidGeometry(
                "num_subarrays and antennas_per_subarray must be positive".into(),
            ));
        }
        if !(region_length.is_finite() && region_length > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "region length must be positive, got {region_length}"
            )));
        }
        if !(subarray_length.is_finite() && subarray_length > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "subarray length must be positive, got {subarray_length}"
            )));
        }
        let min_length = antennas_per_subarray as f64 * HALF_WAVELENGTH;
        // Snap round-off so the half-wavelength grid stays exactly feasible.
        if (subarray_length - min_length).abs() <= GEOMETRY_TOL * min_length {
            subarray_length = min_length;
        }
        if subarray_length < min_length {
            return Err(Error::InvalidGeometry(format!(
                "subarray length {subarray_length} cannot host {antennas_per_subarray} antennas \
                 at half-wavelength spacing (needs {min_length})"
            )));
        }
        let packed = num_subarrays as f64 * subarray_length;
        if packed > region_length * (1.0 + GEOMETRY_TOL) {
            return Err(Error::InvalidGeometry(format!(
                "{num_subarrays} subarrays of length {subarray_length} do not fit in region {region_length}"
            )));
        }
        Ok(Self {
            num_subarrays,
            antennas_per_subarray,
            region_length,
            subarray_length,
            alpha: subarray_length * num_subarrays as f64 / region_length,
        })
    }

    pub fn num_subarrays(&self) -> usize {
        self.num_subarrays
    }

    pub fn antennas_per_subarray(&self) -> usize {
        self.antennas_per_subarray
    }

    /// Total antenna count `M = M_S * M_A`.
    pub fn num_antennas(&self) -> usize {
        self.num_subarrays * self.antennas_per_subarray
    }

    pub fn region_length(&self) -> f64 {
        self.region_length
    }

    pub fn subarray_length(&self) -> f64 {
        self.subarray_length
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Smallest admissible `alpha` for the given antenna count and region, `M λ / (2L)`.
    pub fn min_alpha(num_antennas: usize, region_length: f64) -> f64 {
        num_antennas as f64 * HALF_WAVELENGTH / region_length
    }

    /// True when the antenna offsets admit exactly one feasible configuration.
    pub fn is_array_wise(&self) -> bool {
        self.subarray_length == self.antennas_per_subarray as f64 * HALF_WAVELENGTH
    }

    /// Constraint set on the subarray origins.
    pub fn subarray_interval(&self) -> SpacedInterval {
        let half = 0.5 * self.region_length;
        SpacedInterval {
            lower: -half,
            upper: half - self.subarray_length,
            min_gap: self.subarray_length,
        }
    }

    /// Constraint set on the offsets inside one subarray.
    pub fn antenna_interval(&self) -> SpacedInterval {
        SpacedInterval {
            lower: QUARTER_WAVELENGTH,
            upper: self.subarray_length - QUARTER_WAVELENGTH,
            min_gap: HALF_WAVELENGTH,
        }
    }

    /// Constraint set for independently moving antennas over the whole region.
    pub fn single_layer_interval(&self) -> SpacedInterval {
        let half = 0.5 * self.region_length;
        SpacedInterval {
            lower: -half,
            upper: half,
            min_gap: HALF_WAVELENGTH,
        }
    }
}

/// Ordered points on a line that must stay within `[lower, upper]` with
/// consecutive gaps of at least `min_gap`.
///
/// The subarray origins, the offsets inside each subarray and the single-layer
/// antenna positions all share this constraint shape, so the feasibility
/// predicate, the hinge penalty and the sampler live here once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacedInterval {
    pub lower: f64,
    pub upper: f64,
    pub min_gap: f64,
}

impl SpacedInterval {
    /// Sum of hinge violations: boundary terms for every point plus a spacing
    /// term for every consecutive pair. Zero exactly when `is_feasible`.
    pub fn penalty(&self, points: &[f64]) -> f64 {
        let spacing: f64 = points
            .windows(2)
            .map(|w| hinge(self.min_gap - (w[1] - w[0])))
            .sum();
        let bounds: f64 = points
            .iter()
            .map(|&x| hinge(self.lower - x) + hinge(x - self.upper))
            .sum();
        spacing + bounds
    }

    pub fn is_feasible(&self, points: &[f64]) -> bool {
        points.iter().all(|&x| x >= self.lower && x <= self.upper)
            && points.windows(2).all(|w| w[1] - w[0] >= self.min_gap)
    }

    /// Free length left once `n` points are packed at minimum spacing.
    pub fn slack(&self, n: usize) -> f64 {
        self.upper - self.lower - n.saturating_sub(1) as f64 * self.min_gap
    }

    /// `n` points spread evenly from `lower` to `upper`; a single point is centered.
    pub fn uniform(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lower + self.upper)],
            _ => {
                let step = (self.upper - self.lower) / (n - 1) as f64;
                (0..n).map(|i| self.lower + i as f64 * step).collect()
            }
        }
    }

    /// Draws `n` points uniformly from the feasible set.
    ///
    /// The free slack is split into `n + 1` gaps drawn uniformly from the
    /// simplex, then the minimum spacing is added back. The result can still
    /// miss the exact predicate by one ulp, so callers should verify it.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<f64>> {
        let slack = self.slack(n);
        if n == 0 || slack < 0.0 {
            return None;
        }
        if slack == 0.0 {
            return Some(
                (0..n)
                    .map(|i| self.lower + i as f64 * self.min_gap)
                    .collect(),
            );
        }
        let weights: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let points = weights[..n]
            .iter()
            .enumerate()
            .map(|(i, w)| {
                acc += w;
                self.lower + slack * (acc / total) + i as f64 * self.min_gap
            })
            .collect();
        Some(points)
    }
}

#[inline]
pub(crate) fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

/// Decision variables of the two-layer array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerLayout {
    /// Subarray starting points, one per subarray.
    #[serde(rename = "q")]
    pub subarray_origins: Vec<f64>,
    /// Antenna offsets from their subarray origin, `[subarray][antenna]`.
    #[serde(rename = "d")]
    pub relative_offsets: Vec<Vec<f64>>,
}

impl TwoLayerLayout {
    pub fn new(subarray_origins: Vec<f64>, relative_offsets: Vec<Vec<f64>>) -> Self {
        Self {
            subarray_origins,
            relative_offsets,
        }
    }

    pub fn check_dims(&self, arch: &ArrayArchitecture) -> Result<()> {
        check_len(
            "subarray origins",
            arch.num_subarrays(),
            self.subarray_origins.len(),
        )?;
        check_offset_dims(&self.relative_offsets, arch)
    }

    /// Absolute antenna positions, subarray-major.
    pub fn absolute_positions(&self, arch: &ArrayArchitecture) -> Result<Vec<f64>> {
        self.check_dims(arch)?;
        Ok(self
            .subarray_origins
            .iter()
            .zip(&self.relative_offsets)
            .flat_map(|(&q, row)| row.iter().map(move |&d| q + d))
            .collect())
    }

    /// Flattened offsets in the antenna-optimization coordinate space.
    pub fn flat_offsets(&self) -> Vec<f64> {
        self.relative_offsets.iter().flatten().copied().collect()
    }

    pub fn from_flat(
        subarray_origins: &[f64],
        flat_offsets: &[f64],
        arch: &ArrayArchitecture,
    ) -> Result<Self> {
        check_len(
            "subarray origins",
            arch.num_subarrays(),
            subarray_origins.len(),
        )?;
        Ok(Self {
            subarray_origins: subarray_origins.to_vec(),
            relative_offsets: unflatten_offsets(flat_offsets, arch)?,
        })
    }
}

fn check_offset_dims(d: &[Vec<f64>], arch: &ArrayArchitecture) -> Result<()> {
    check_len("offset rows", arch.num_subarrays(), d.len())?;
    for row in d {
        check_len("offsets per subarray", arch.antennas_per_subarray(), row.len())?;
    }
    Ok(())
}

/// Splits a flat offset vector of length `M` into `M_S` rows of `M_A`.
pub fn unflatten_offsets(flat: &[f64], arch: &ArrayArchitecture) -> Result<Vec<Vec<f64>>> {
    check_len("flat offsets", arch.num_antennas(), flat.len())?;
    Ok(flat
        .chunks(arch.antennas_per_subarray())
        .map(<[f64]>::to_vec)
        .collect())
}

/// A single violated layout constraint; indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Subarrays `subarray` and `subarray + 1` are closer than one subarray length.
    SubarrayOverlap { subarray: usize },
    SubarrayOutsideRegion { subarray: usize },
    AntennaOutsideSubarray { subarray: usize, antenna: usize },
    /// Antennas `antenna` and `antenna + 1` are closer than half a wavelength.
    AntennaSpacing { subarray: usize, antenna: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::SubarrayOverlap { subarray } => {
                write!(f, "subarrays {subarray} and {} overlap", subarray + 1)
            }
            Self::SubarrayOutsideRegion { subarray } => {
                write!(f, "subarray {subarray} leaves the movable region")
            }
            Self::AntennaOutsideSubarray { subarray, antenna } => {
                write!(f, "antenna {antenna} leaves subarray {subarray}")
            }
            Self::AntennaSpacing { subarray, antenna } => write!(
                f,
                "antennas {antenna} and {} of subarray {subarray} closer than half a wavelength",
                antenna + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates every layout constraint exactly; boundary equality is feasible.
pub fn check_feasible(
    layout: &TwoLayerLayout,
    arch: &ArrayArchitecture,
) -> Result<FeasibilityReport> {
    layout.check_dims(arch)?;
    let mut violations = Vec::new();

    let sub = arch.subarray_interval();
    let q = &layout.subarray_origins;
    for (s, w) in q.windows(2).enumerate() {
        if !(w[1] - w[0] >= sub.min_gap) {
            violations.push(Violation::SubarrayOverlap { subarray: s });
        }
    }
    for (s, &qs) in q.iter().enumerate() {
        if !(qs >= sub.lower && qs <= sub.upper) {
            violations.push(Violation::SubarrayOutsideRegion { subarray: s });
        }
    }

    let ant = arch.antenna_interval();
    for (s, row) in layout.relative_offsets.iter().enumerate() {
        for (a, &d) in row.iter().enumerate() {
            if !(d >= ant.lower && d <= ant.upper) {
                violations.push(Violation::AntennaOutsideSubarray {
                    subarray: s,
                    antenna: a,
                });
            }
        }
        for (a, w) in row.windows(2).enumerate() {
            if !(w[1] - w[0] >= ant.min_gap) {
                violations.push(Violation::AntennaSpacing {
                    subarray: s,
                    antenna: a,
                });
            }
        }
    }
    Ok(FeasibilityReport { violations })
}

/// Hinge penalty of the subarray-origin constraints.
pub fn subarray_penalty(q: &[f64], arch: &ArrayArchitecture) -> Result<f64> {
    check_len("subarray origins", arch.num_subarrays(), q.len())?;
    Ok(arch.subarray_interval().penalty(q))
}

/// Hinge penalty of the per-subarray offset constraints.
pub fn antenna_penalty(d: &[Vec<f64>], arch: &ArrayArchitecture) -> Result<f64> {
    check_offset_dims(d, arch)?;
    let ant = arch.antenna_interval();
    Ok(d.iter().map(|row| ant.penalty(row)).sum())
}

/// Same as [`antenna_penalty`] on the flat offset vector.
pub fn antenna_penalty_flat(flat: &[f64], arch: &ArrayArchitecture) -> Result<f64> {
    check_len("flat offsets", arch.num_antennas(), flat.len())?;
    let ant = arch.antenna_interval();
    Ok(flat
        .chunks(arch.antennas_per_subarray())
        .map(|row| ant.penalty(row))
        .sum())
}

/// Total motor travel `(C_S, C_A)` between two layouts, in wavelengths.
pub fn sum_displacement(initial: &TwoLayerLayout, fin: &TwoLayerLayout) -> Result<(f64, f64)> {
    check_len(
        "subarray origins",
        initial.subarray_origins.len(),
        fin.subarray_origins.len(),
    )?;
    check_len(
        "offset rows",
        initial.relative_offsets.len(),
        fin.relative_offsets.len(),
    )?;
    let c_s = l1_distance(&initial.subarray_origins, &fin.subarray_origins);
    let mut c_a = 0.0;
    for (r0, r1) in initial.relative_offsets.iter().zip(&fin.relative_offsets) {
        check_len("offsets per subarray", r0.len(), r1.len())?;
        c_a += l1_distance(r0, r1);
    }
    Ok((c_s, c_a))
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Reference layout: subarrays spread evenly across the region and antennas
/// spread evenly inside each subarray.
pub fn uniform_initial_layout(arch: &ArrayArchitecture) -> Result<TwoLayerLayout> {
    let sub = arch.subarray_interval();
    if sub.slack(arch.num_subarrays()) < 0.0 {
        return Err(Error::InvalidGeometry(
            "subarrays cannot be packed into the region".into(),
        ));
    }
    let q = sub.uniform(arch.num_subarrays());
    let row = arch.antenna_interval().uniform(arch.antennas_per_subarray());
    Ok(TwoLayerLayout::new(q, vec![row; arch.num_subarrays()]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch(ms: usize, ma: usize, l: f64, la: f64) -> ArrayArchitecture {
        ArrayArchitecture::with_subarray_length(ms, ma, l, la).unwrap()
    }

    fn table_one() -> ArrayArchitecture {
        ArrayArchitecture::new(4, 3, 24.0, 0.375).unwrap()
    }

    #[test]
    fn absolute_positions_examples() {
        let a = arch(2, 2, 10.0, 2.0);
        let layout = TwoLayerLayout::new(vec![0.0, 5.0], vec![vec![0.5, 1.5]; 2]);
        assert_eq!(
            layout.absolute_positions(&a).unwrap(),
            vec![0.5, 1.5, 5.5, 6.5]
        );

        let a = arch(1, 1, 10.0, 0.5);
        let layout = TwoLayerLayout::new(vec![0.0], vec![vec![0.0]]);
        assert_eq!(layout.absolute_positions(&a).unwrap(), vec![0.0]);

        let layout = TwoLayerLayout::new(
            vec![-12.0, -3.0, 3.0, 9.0],
            vec![vec![0.25, 0.75, 1.25]; 4],
        );
        assert_eq!(
            layout.absolute_positions(&table_one()).unwrap(),
            vec![-11.75, -11.25, -10.75, -2.75, -2.25, -1.75, 3.25, 3.75, 4.25, 9.25, 9.75, 10.25]
        );
    }

    #[test]
    fn absolute_positions_rejects_bad_dims() {
        let layout = TwoLayerLayout::new(vec![0.0], vec![vec![0.25, 0.75]]);
        assert!(matches!(
            layout.absolute_positions(&table_one()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn feasibility_examples() {
        let a = arch(2, 2, 10.0, 2.0);
        let ok = TwoLayerLayout::new(vec![0.0, 2.0], vec![vec![0.25, 0.75]; 2]);
        assert!(check_feasible(&ok, &a).unwrap().is_feasible());

        let overlap = TwoLayerLayout::new(vec![0.0, 1.0], vec![vec![0.25, 0.75]; 2]);
        assert_eq!(
            check_feasible(&overlap, &a).unwrap().violations,
            vec![Violation::SubarrayOverlap { subarray: 0 }]
        );

        let outside = TwoLayerLayout::new(vec![-5.0, 0.0], vec![vec![0.25, 1.9], vec![0.25, 0.75]]);
        assert_eq!(
            check_feasible(&outside, &a).unwrap().violations,
            vec![Violation::AntennaOutsideSubarray {
                subarray: 0,
                antenna: 1
            }]
        );
    }

    #[test]
    fn penalty_examples() {
        let a = arch(2, 2, 10.0, 2.0);
        assert_eq!(subarray_penalty(&[0.0, 1.0], &a).unwrap(), 1.0);
        assert_eq!(subarray_penalty(&[0.0, 2.0], &a).unwrap(), 0.0);

        let a1 = arch(1, 2, 10.0, 2.0);
        assert_eq!(subarray_penalty(&[4.0], &a1).unwrap(), 1.0);

        let p = antenna_penalty(&[vec![0.2, 0.5]], &a1).unwrap();
        assert!((p - 0.25).abs() < 1e-15, "{p}");

        let tight = arch(1, 3, 10.0, 1.5);
        assert_eq!(antenna_penalty(&[vec![0.25, 0.75, 1.25]], &tight).unwrap(), 0.0);
        assert!(tight.is_array_wise());
    }

    #[test]
    fn displacement_examples() {
        let a = TwoLayerLayout::new(vec![0.0, 2.0], vec![vec![0.25, 0.75]; 2]);
        let b = TwoLayerLayout::new(vec![1.0, 3.0], vec![vec![0.3, 0.9], vec![0.25, 0.75]]);
        let (cs, ca) = sum_displacement(&a, &b).unwrap();
        assert_eq!(cs, 2.0);
        assert!((ca - 0.2).abs() < 1e-15);
        assert_eq!(sum_displacement(&a, &a).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn uniform_layout_table_one() {
        let a = table_one();
        assert_eq!(a.subarray_length(), 2.25);
        let layout = uniform_initial_layout(&a).unwrap();
        assert_eq!(layout.subarray_origins, vec![-12.0, -4.75, 2.5, 9.75]);
        for row in &layout.relative_offsets {
            assert_eq!(row, &vec![0.25, 1.125, 2.0]);
        }
        assert!(check_feasible(&layout, &a).unwrap().is_feasible());
    }

    #[test]
    fn uniform_layout_single_subarray_is_centered() {
        let a = arch(1, 3, 10.0, 2.0);
        let layout = uniform_initial_layout(&a).unwrap();
        assert_eq!(layout.subarray_origins, vec![-1.0]);
        assert!(check_feasible(&layout, &a).unwrap().is_feasible());
    }

    #[test]
    fn flatten_ordering() {
        let a = arch(2, 2, 10.0, 2.0);
        let layout = TwoLayerLayout::new(vec![0.0, 3.0], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(layout.flat_offsets(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            TwoLayerLayout::from_flat(&[0.0, 3.0], &[1.0, 2.0, 3.0, 4.0], &a).unwrap(),
            layout
        );
        assert!(unflatten_offsets(&[1.0, 2.0, 3.0], &a).is_err());
    }

    #[test]
    fn architecture_validation() {
        assert!(ArrayArchitecture::new(4, 3, 24.0, 0.125).is_err());
        assert!(ArrayArchitecture::new(4, 3, 24.0, 1.5).is_err());
        let aw = ArrayArchitecture::new(4, 3, 24.0, 0.25).unwrap();
        assert!(aw.is_array_wise());
        assert_eq!(ArrayArchitecture::min_alpha(12, 24.0), 0.25);
        let full = ArrayArchitecture::new(4, 3, 24.0, 1.0).unwrap();
        assert!(check_feasible(&uniform_initial_layout(&full).unwrap(), &full)
            .unwrap()
            .is_feasible());
    }

    #[test]
    fn sampler_hits_feasible_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = table_one();
        for interval in [a.subarray_interval(), a.antenna_interval(), a.single_layer_interval()] {
            for _ in 0..1000 {
                let n = if interval == a.subarray_interval() { 4 } else { 3 };
                let x = interval.sample(n, &mut rng).unwrap();
                assert!(interval.penalty(&x) < 1e-12);
            }
        }
        let tight = arch(1, 3, 10.0, 1.5).antenna_interval();
        assert_eq!(tight.sample(3, &mut rng).unwrap(), vec![0.25, 0.75, 1.25]);
        assert!(tight.sample(4, &mut rng).is_none());
    }
}
