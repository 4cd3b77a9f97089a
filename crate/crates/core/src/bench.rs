//! Benchmark objectives over hybrid spaces. All are minimization problems.
//!
//! Each benchmark has a [`SpaceSpec`] whose discrete variables are indices
//! `0..arity`; the integer level seen by the formula is `offset + index`
//! (e.g. pressure-vessel thicknesses run `1..=100`).

use std::fmt;
use std::path::Path;

use rand::Rng;

use crate::rng::{self, Stream};
use crate::space::{ContinuousVar, DiscreteVar, HybridPoint, SpaceSpec};
use crate::{Error, Result};

/// Bundled welded-beam constants table.
pub const WELDED_BEAM_CONSTANTS: &str = include_str!("../data/welded_beam_constants.tsv");

/// Instance seed of the registered mixed-integer sphere shifts.
pub const SPHERE_INSTANCE_SEED: u64 = 1;

/// Names accepted by [`lookup`].
pub const REGISTRY: [&str; 5] = [
    "pressure_vessel",
    "welded_beam",
    "speed_reducer",
    "mixint_sphere",
    "mixint_sphere_20",
];

/// A point in raw benchmark units: integer levels and unnormalized reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint {
    pub discrete: Vec<i64>,
    pub continuous: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeldedBeamRow {
    pub g1: f64,
    pub g2: f64,
    pub l: f64,
}

/// Per-material constants `(G1, G2, L)` indexed by the `x2` level.
#[derive(Debug, Clone, PartialEq)]
pub struct WeldedBeamConstants {
    rows: Vec<(i64, WeldedBeamRow)>,
}

impl WeldedBeamConstants {
    /// Parses whitespace-separated rows `x2 G1 G2 L`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::BenchmarkData(format!(
                    "line {}: expected 4 columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let bad = |what: &str| Error::BenchmarkData(format!("line {}: invalid {what}", lineno + 1));
            let idx: i64 = fields[0].parse().map_err(|_| bad("x2 index"))?;
            let g1: f64 = fields[1].parse().map_err(|_| bad("G1"))?;
            let g2: f64 = fields[2].parse().map_err(|_| bad("G2"))?;
            let l: f64 = fields[3].parse().map_err(|_| bad("L"))?;
            rows.push((idx, WeldedBeamRow { g1, g2, l }));
        }
        if rows.is_empty() {
            return Err(Error::BenchmarkData("constants table is empty".into()));
        }
        Ok(Self { rows })
    }

    pub fn bundled() -> Self {
        Self::parse(WELDED_BEAM_CONSTANTS).expect("bundled constants table parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// `G1 = G2 = 1, L = 0` for every material, for checking the formula
    /// shape independently of the transcribed values.
    pub fn unit_fixture() -> Self {
        Self {
            rows: (0..4)
                .map(|i| {
                    (
                        i,
                        WeldedBeamRow {
                            g1: 1.0,
                            g2: 1.0,
                            l: 0.0,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn row(&self, x2: i64) -> Result<WeldedBeamRow> {
        self.rows
            .iter()
            .find(|(i, _)| *i == x2)
            .map(|(_, r)| *r)
            .ok_or_else(|| Error::BenchmarkData(format!("no welded-beam constants for x2 = {x2}")))
    }
}

fn check_int(name: &str, v: i64, lo: i64, hi: i64) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            name: name.into(),
            value: v as f64,
            lower: lo as f64,
            upper: hi as f64,
        })
    }
}

fn check_real(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            name: name.into(),
            value: v,
            lower: lo,
            upper: hi,
        })
    }
}

/// Cost of a cylindrical pressure vessel.
pub fn pressure_vessel(x1: i64, x2: i64, x3: f64, x4: f64) -> Result<f64> {
    check_int("x1", x1, 1, 100)?;
    check_int("x2", x2, 1, 100)?;
    check_real("x3", x3, 10.0, 200.0)?;
    check_real("x4", x4, 10.0, 240.0)?;
    let (x1, x2) = (x1 as f64, x2 as f64);
    Ok(0.6224 * x1 * x3 * x4 + 1.7781 * x2 * x3 * x3 + 3.1661 * x1 * x1 * x4 + 19.84 * x1 * x1 * x3)
}

/// Fabrication cost of a welded beam; `x = (x1, x2, x3, x4, x5, x6)`.
pub fn welded_beam(
    x1: i64,
    x2: i64,
    x: [f64; 4],
    constants: &WeldedBeamConstants,
) -> Result<f64> {
    check_int("x1", x1, 0, 1)?;
    check_int("x2", x2, 0, 3)?;
    let [x3, x4, x5, x6] = x;
    check_real("x3", x3, 0.0625, 2.0)?;
    check_real("x4", x4, 0.0, 20.0)?;
    check_real("x5", x5, 2.0, 20.0)?;
    check_real("x6", x6, 0.0625, 2.0)?;
    let c = constants.row(x2)?;
    let x1 = x1 as f64;
    Ok((1.0 + c.g1) * (x1 * x5 + x4) * x3 * x3 + c.g2 * x5 * x6 * (c.l + x4))
}

pub const SPEED_REDUCER_BOUNDS: [(f64, f64); 6] = [
    (2.6, 3.6),
    (0.7, 0.8),
    (7.3, 8.3),
    (0.7, 0.8),
    (2.9, 3.9),
    (5.0, 5.5),
];

/// Weight of a speed reducer; `x = (x2, …, x7)`.
pub fn speed_reducer(x1: i64, x: [f64; 6]) -> Result<f64> {
    check_int("x1", x1, 17, 28)?;
    for (i, (&v, &(lo, hi))) in x.iter().zip(&SPEED_REDUCER_BOUNDS).enumerate() {
        check_real(&format!("x{}", i + 2), v, lo, hi)?;
    }
    let [x2, x3, x4, x5, x6, x7] = x;
    let x1 = x1 as f64;
    Ok(0.79 * x2 * x3 * x3 * (3.33 * x1.powi(3) + 14.93 * x1 - 43.09)
        - 1.51 * x2 * (x6 * x6 + x7 * x7)
        + 7.48 * (x6.powi(3) + x7.powi(3))
        + 0.79 * (x4 * x6 * x6 + x5 * x7 * x7))
}

/// Shifted sphere over stacked integer levels and raw reals:
/// `Σ_i (z_i − o_i)²`.
pub fn mixint_sphere(z: &RawPoint, shift: &[f64]) -> f64 {
    z.discrete
        .iter()
        .map(|&v| v as f64)
        .chain(z.continuous.iter().copied())
        .zip(shift)
        .map(|(v, o)| (v - o) * (v - o))
        .sum()
}

/// Seed-determined sphere shift: integer levels in `0..16` for the discrete
/// block, reals in `[-4, 4]` for the continuous block.
pub fn sphere_shift(n_discrete: usize, n_continuous: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, Stream::Benchmark);
    let mut o: Vec<f64> = (0..n_discrete).map(|_| r.random_range(0..16) as f64).collect();
    o.extend((0..n_continuous).map(|_| r.random_range(-4.0..=4.0)));
    o
}

#[derive(Debug, Clone, PartialEq)]
enum Objective {
    PressureVessel,
    WeldedBeam(WeldedBeamConstants),
    SpeedReducer,
    MixintSphere { shift: Vec<f64> },
}

/// A registered objective with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: String,
    pub spec: SpaceSpec,
    /// Integer level of category index 0, per discrete variable.
    pub offsets: Vec<i64>,
    objective: Objective,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} discrete, {} continuous, minimize)",
            self.name,
            self.spec.m(),
            self.spec.n()
        )
    }
}

fn discrete(name: &str, arity: usize) -> DiscreteVar {
    DiscreteVar {
        name: name.into(),
        arity,
    }
}

fn continuous(name: &str, lower: f64, upper: f64) -> ContinuousVar {
    ContinuousVar {
        name: name.into(),
        lower,
        upper,
    }
}

impl Benchmark {
    pub fn pressure_vessel() -> Self {
        Self {
            name: "pressure_vessel".into(),
            spec: SpaceSpec::new(
                vec![discrete("x1", 100), discrete("x2", 100)],
                vec![continuous("x3", 10.0, 200.0), continuous("x4", 10.0, 240.0)],
            ),
            offsets: vec![1, 1],
            objective: Objective::PressureVessel,
        }
    }

    pub fn welded_beam(constants: WeldedBeamConstants) -> Self {
        Self {
            name: "welded_beam".into(),
            spec: SpaceSpec::new(
                vec![discrete("x1", 2), discrete("x2", 4)],
                vec![
                    continuous("x3", 0.0625, 2.0),
                    continuous("x4", 0.0, 20.0),
                    continuous("x5", 2.0, 20.0),
                    continuous("x6", 0.0625, 2.0),
                ],
            ),
            offsets: vec![0, 0],
            objective: Objective::WeldedBeam(constants),
        }
    }

    pub fn speed_reducer() -> Self {
        let continuous_vars = SPEED_REDUCER_BOUNDS
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| continuous(&format!("x{}", i + 2), lo, hi))
            .collect();
        Self {
            name: "speed_reducer".into(),
            spec: SpaceSpec::new(vec![discrete("x1", 12)], continuous_vars),
            offsets: vec![17],
            objective: Objective::SpeedReducer,
        }
    }

    pub fn mixint_sphere(n_discrete: usize, n_continuous: usize, seed: u64) -> Self {
        let name = if n_discrete + n_continuous == 10 {
            "mixint_sphere".to_string()
        } else {
            format!("mixint_sphere_{}", n_discrete + n_continuous)
        };
        Self {
            name,
            spec: SpaceSpec::new(
                (0..n_discrete).map(|i| discrete(&format!("z{i}"), 16)).collect(),
                (0..n_continuous)
                    .map(|i| continuous(&format!("x{i}"), -5.0, 5.0))
                    .collect(),
            ),
            offsets: vec![0; n_discrete],
            objective: Objective::MixintSphere {
                shift: sphere_shift(n_discrete, n_continuous, seed),
            },
        }
    }

    /// The shift vector of a sphere benchmark.
    pub fn sphere_optimum(&self) -> Option<&[f64]> {
        match &self.objective {
            Objective::MixintSphere { shift } => Some(shift),
            _ => None,
        }
    }

    pub fn to_raw(&self, x: &HybridPoint) -> Result<RawPoint> {
        self.spec.check_point(x)?;
        Ok(RawPoint {
            discrete: x
                .discrete
                .iter()
                .zip(&self.offsets)
                .map(|(&c, &o)| o + c as i64)
                .collect(),
            continuous: self.spec.denormalize(&x.continuous)?,
        })
    }

    pub fn from_raw(&self, raw: &RawPoint) -> Result<HybridPoint> {
        if raw.discrete.len() != self.spec.m() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.m(),
                got: raw.discrete.len(),
            });
        }
        let mut discrete = Vec::with_capacity(raw.discrete.len());
        for ((&v, &o), var) in raw.discrete.iter().zip(&self.offsets).zip(&self.spec.discrete) {
            check_int(&var.name, v, o, o + var.arity as i64 - 1)?;
            discrete.push((v - o) as usize);
        }
        Ok(HybridPoint::new(discrete, self.spec.normalize(&raw.continuous)?))
    }

    /// Objective value at a raw point; rejects anything out of bounds.
    pub fn evaluate(&self, raw: &RawPoint) -> Result<f64> {
        if raw.discrete.len() != self.spec.m() || raw.continuous.len() != self.spec.n() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dims(),
                got: raw.discrete.len() + raw.continuous.len(),
            });
        }
        let c = &raw.continuous;
        let d = &raw.discrete;
        match &self.objective {
            Objective::PressureVessel => pressure_vessel(d[0], d[1], c[0], c[1]),
            Objective::WeldedBeam(k) => welded_beam(d[0], d[1], [c[0], c[1], c[2], c[3]], k),
            Objective::SpeedReducer => speed_reducer(d[0], [c[0], c[1], c[2], c[3], c[4], c[5]]),
            Objective::MixintSphere { shift } => {
                self.from_raw(raw)?;
                Ok(mixint_sphere(raw, shift))
            }
        }
    }

    /// Objective value at a point in normalized coordinates.
    pub fn evaluate_normalized(&self, x: &HybridPoint) -> Result<f64> {
        self.evaluate(&self.to_raw(x)?)
    }
}

/// Registered benchmark by name.
pub fn lookup(name: &str) -> Result<Benchmark> {
    match name {
        "pressure_vessel" => Ok(Benchmark::pressure_vessel()),
        "welded_beam" => Ok(Benchmark::welded_beam(WeldedBeamConstants::bundled())),
        "speed_reducer" => Ok(Benchmark::speed_reducer()),
        "mixint_sphere" => Ok(Benchmark::mixint_sphere(8, 2, SPHERE_INSTANCE_SEED)),
        "mixint_sphere_20" => Ok(Benchmark::mixint_sphere(16, 4, SPHERE_INSTANCE_SEED)),
        _ => Err(Error::UnknownBenchmark {
            name: name.into(),
            available: REGISTRY.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pressure_vessel_examples() {
        assert_abs_diff_eq!(
            pressure_vessel(1, 1, 10.0, 10.0).unwrap(),
            62.24 + 177.81 + 31.661 + 198.4,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(pressure_vessel(1, 1, 10.0, 10.0).unwrap(), 470.111, epsilon = 1e-9);
        assert!(matches!(
            pressure_vessel(1, 1, 9.0, 10.0),
            Err(Error::OutOfBounds { .. })
        ));
        let delta = pressure_vessel(1, 1, 10.0, 20.0).unwrap() - pressure_vessel(1, 1, 10.0, 10.0).unwrap();
        assert_abs_diff_eq!(delta, 62.24 + 31.661, epsilon = 1e-9);
    }

    #[test]
    fn welded_beam_fixture() {
        let k = WeldedBeamConstants::unit_fixture();
        assert_abs_diff_eq!(welded_beam(1, 0, [1.0, 1.0, 2.0, 1.0], &k).unwrap(), 8.0);
        // with x1 = 0 the first term no longer sees x5
        let a = welded_beam(0, 2, [0.5, 3.0, 2.0, 1.0], &k).unwrap();
        let b = welded_beam(0, 2, [0.5, 3.0, 9.0, 1.0], &k).unwrap();
        let second = |x5: f64| 1.0 * x5 * 1.0 * (0.0 + 3.0);
        assert_abs_diff_eq!(b - a, second(9.0) - second(2.0), epsilon = 1e-12);
    }

    #[test]
    fn welded_beam_bundled_constants() {
        let k = WeldedBeamConstants::bundled();
        assert_eq!(k.row(0).unwrap(), WeldedBeamRow { g1: 0.1047, g2: 0.0481, l: 14.0 });
        assert!(k.row(4).is_err());
        let b = lookup("welded_beam").unwrap();
        let mut r = rng::seeded(0);
        for _ in 0..10_000 {
            let v = b.evaluate_normalized(&b.spec.sample_uniform(&mut r)).unwrap();
            assert!(v.is_finite() && v > 0.0);
        }
    }

    #[test]
    fn welded_beam_constants_parse_errors() {
        assert!(WeldedBeamConstants::parse("# only a comment\n").is_err());
        assert!(WeldedBeamConstants::parse("0 1 2\n").is_err());
        assert!(WeldedBeamConstants::parse("0 a 2 3\n").is_err());
    }

    #[test]
    fn speed_reducer_golden_value() {
        let v = speed_reducer(17, [2.6, 0.7, 7.3, 0.7, 2.9, 5.0]).unwrap();
        // value from a separate Python evaluation of the same formula
        assert_abs_diff_eq!(v, 17726.6462546, epsilon = 1e-6);
        assert!(speed_reducer(16, [2.6, 0.7, 7.3, 0.7, 2.9, 5.0]).is_err());
    }

    #[test]
    fn speed_reducer_x6_finite_difference() {
        let x = [3.1, 0.75, 7.8, 0.72, 3.3, 5.2];
        let (x2, x4, x6) = (x[0], x[2], x[4]);
        let analytic = -1.51 * x2 * 2.0 * x6 + 7.48 * 3.0 * x6 * x6 + 0.79 * x4 * 2.0 * x6;
        let h = 1e-5;
        let mut up = x;
        up[4] += h;
        let mut down = x;
        down[4] -= h;
        let fd = (speed_reducer(20, up).unwrap() - speed_reducer(20, down).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(fd, analytic, epsilon = 1e-6);
    }

    #[test]
    fn sphere_examples() {
        let zero = RawPoint {
            discrete: vec![0; 8],
            continuous: vec![0.0; 2],
        };
        assert_eq!(mixint_sphere(&zero, &[0.0; 10]), 0.0);
        let b = lookup("mixint_sphere").unwrap();
        let o = b.sphere_optimum().unwrap().to_vec();
        for j in 0..10 {
            let mut raw = RawPoint {
                discrete: o[..8].iter().map(|&v| v as i64).collect(),
                continuous: o[8..].to_vec(),
            };
            // step toward the interior so the point stays in bounds
            if j < 8 {
                raw.discrete[j] += if raw.discrete[j] < 15 { 1 } else { -1 };
            } else {
                raw.continuous[j - 8] += if o[j] < 4.0 { 1.0 } else { -1.0 };
            }
            assert_abs_diff_eq!(b.evaluate(&raw).unwrap(), 1.0, epsilon = 1e-12);
        }
        let mut r = rng::seeded(4);
        for _ in 0..100 {
            let x = b.spec.sample_uniform(&mut r);
            let raw = b.to_raw(&x).unwrap();
            let mut expected = 0.0;
            for i in 0..8 {
                expected += (raw.discrete[i] as f64 - o[i]).powi(2);
            }
            for i in 0..2 {
                expected += (raw.continuous[i] - o[8 + i]).powi(2);
            }
            assert_abs_diff_eq!(b.evaluate(&raw).unwrap(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn lookup_examples() {
        let pv = lookup("pressure_vessel").unwrap();
        assert_eq!((pv.spec.m(), pv.spec.n()), (2, 2));
        let sr = lookup("speed_reducer").unwrap();
        assert_eq!((sr.spec.m(), sr.spec.n()), (1, 6));
        let s20 = lookup("mixint_sphere_20").unwrap();
        assert_eq!((s20.spec.m(), s20.spec.n()), (16, 4));
        let err = lookup("no_such").unwrap_err().to_string();
        for name in REGISTRY {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn evaluation_is_deterministic_and_guarded() {
        for name in REGISTRY {
            let b = lookup(name).unwrap();
            b.spec.clone().validate().unwrap();
            let mut r = rng::seeded(8);
            let x = b.spec.sample_uniform(&mut r);
            let a = b.evaluate_normalized(&x).unwrap();
            assert_eq!(a.to_bits(), b.evaluate_normalized(&x).unwrap().to_bits());
            let mut raw = b.to_raw(&x).unwrap();
            assert_eq!(b.from_raw(&raw).unwrap().discrete, x.discrete);
            raw.discrete[0] = b.offsets[0] + b.spec.discrete[0].arity as i64;
            assert!(b.evaluate(&raw).is_err());
        }
    }
}
