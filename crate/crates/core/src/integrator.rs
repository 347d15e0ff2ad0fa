//! Classical RK-4 integration and consecutive-timestep datasets.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::chaos::VectorField;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("dimension mismatch: system has {expected}, state has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("step size must be a non-negative finite number, got {0}")]
    BadStep(f64),
    #[error("need at least one step")]
    NoSteps,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("trajectory needs at least 2 states, has {0}")]
    TooShort(usize),
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    BadSplit(f64),
    #[error("dimension {dim} is constant on the training portion; cannot normalize")]
    DegenerateDimension { dim: usize },
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("dataset file is inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One RK-4 step `X + dt/6 (k1 + 2k2 + 2k3 + k4)`.
pub fn rk4_step<F: VectorField + ?Sized>(
    system: &F,
    state: &[f64],
    dt: f64,
) -> Result<Vec<f64>, IntegrateError> {
    let mut out = vec![0.0; state.len()];
    let mut scratch = Rk4Scratch::new(state.len());
    rk4_step_into(system, state, dt, &mut scratch, &mut out)?;
    Ok(out)
}

struct Rk4Scratch {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_step_into<F: VectorField + ?Sized>(
    system: &F,
    state: &[f64],
    dt: f64,
    s: &mut Rk4Scratch,
    out: &mut [f64],
) -> Result<(), IntegrateError> {
    let n = system.dimension();
    if state.len() != n {
        return Err(IntegrateError::Dimension {
            expected: n,
            got: state.len(),
        });
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(IntegrateError::BadStep(dt));
    }
    let half = dt / 2.0;
    let [k1, k2, k3, k4] = &mut s.k;
    let tmp = &mut s.tmp;

    system.eval(state, k1);
    for i in 0..n {
        tmp[i] = state[i] + half * k1[i];
    }
    system.eval(tmp, k2);
    for i in 0..n {
        tmp[i] = state[i] + half * k2[i];
    }
    system.eval(tmp, k3);
    for i in 0..n {
        tmp[i] = state[i] + dt * k3[i];
    }
    system.eval(tmp, k4);

    let mut finite = true;
    for i in 0..n {
        finite &= k1[i].is_finite() && k2[i].is_finite() && k3[i].is_finite() && k4[i].is_finite();
        out[i] = state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        finite &= out[i].is_finite();
    }
    if finite {
        Ok(())
    } else {
        Err(IntegrateError::NonFinite { step: 0 })
    }
}

/// A fixed-step solution. `states[0]` is the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub dt: f64,
    pub t0: f64,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn from_states(dim: usize, dt: f64, t0: f64, states: Vec<Vec<f64>>) -> Self {
        assert!(states.iter().all(|s| s.len() == dim));
        Self {
            dim,
            dt,
            t0,
            states: states.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn x0(&self) -> &[f64] {
        self.state(0)
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }
}

/// Integrates `steps` RK-4 steps from `x0`, returning `steps + 1` states.
pub fn integrate<F: VectorField + ?Sized>(
    system: &F,
    x0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<Trajectory, IntegrateError> {
    if steps == 0 {
        return Err(IntegrateError::NoSteps);
    }
    let n = system.dimension();
    if x0.len() != n {
        return Err(IntegrateError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { step: 0 });
    }
    let mut states = Vec::with_capacity((steps + 1) * n);
    states.extend_from_slice(x0);
    let mut scratch = Rk4Scratch::new(n);
    let mut next = vec![0.0; n];
    for step in 0..steps {
        let cur = &states[step * n..(step + 1) * n];
        rk4_step_into(system, cur, dt, &mut scratch, &mut next).map_err(|e| match e {
            IntegrateError::NonFinite { .. } => IntegrateError::NonFinite { step: step + 1 },
            other => other,
        })?;
        states.extend_from_slice(&next);
    }
    Ok(Trajectory {
        dim: n,
        dt,
        t0: 0.0,
        states,
    })
}

/// Per-dimension min-max scaling to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub min: f32,
    pub max: f32,
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats { min: 0.0, max: 1.0 };

    pub fn range(&self) -> f32 {
        self.max - self.min
    }

    pub fn normalize(&self, x: f64) -> f32 {
        ((x - self.min as f64) / (self.max as f64 - self.min as f64)) as f32
    }

    pub fn denormalize(&self, y: f32) -> f64 {
        y as f64 * (self.max as f64 - self.min as f64) + self.min as f64
    }
}

/// Input/target pairs from consecutive trajectory samples, stored in single
/// precision. The first `train_count` rows are the training portion.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub norm_stats: Vec<NormStats>,
    pub train_count: usize,
    inputs: Vec<f32>,
    targets: Vec<f32>,
}

impl Dataset {
    pub fn new(
        dim: usize,
        norm_stats: Vec<NormStats>,
        train_count: usize,
        inputs: Vec<f32>,
        targets: Vec<f32>,
    ) -> Self {
        assert_eq!(norm_stats.len(), dim);
        assert_eq!(inputs.len(), targets.len());
        assert_eq!(inputs.len() % dim, 0);
        assert!(train_count <= inputs.len() / dim);
        Self {
            dim,
            norm_stats,
            train_count,
            inputs,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn test_count(&self) -> usize {
        self.len() - self.train_count
    }

    pub fn input(&self, k: usize) -> &[f32] {
        &self.inputs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn target(&self, k: usize) -> &[f32] {
        &self.targets[k * self.dim..(k + 1) * self.dim]
    }

    pub fn inputs(&self) -> &[f32] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f32] {
        &self.targets
    }

    /// Row range `[0, train_count)`.
    pub fn train(&self) -> (&[f32], &[f32]) {
        let end = self.train_count * self.dim;
        (&self.inputs[..end], &self.targets[..end])
    }

    pub fn test(&self) -> (&[f32], &[f32]) {
        let start = self.train_count * self.dim;
        (&self.inputs[start..], &self.targets[start..])
    }

    pub fn normalize_state(&self, x: &[f64]) -> Vec<f32> {
        x.iter()
            .zip(&self.norm_stats)
            .map(|(v, s)| s.normalize(*v))
            .collect()
    }

    const MAGIC: &'static [u8; 8] = b"HENNCDS1";

    /// Little-endian binary layout: magic, `u32` N, `u64` M, `u64` train
    /// count, N × (`f32` min, `f32` max), then M rows of 2N `f32` (input
    /// then target).
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.train_count as u64).to_le_bytes())?;
        for s in &self.norm_stats {
            w.write_all(&s.min.to_le_bytes())?;
            w.write_all(&s.max.to_le_bytes())?;
        }
        let mut row = Vec::with_capacity(8 * self.dim);
        for k in 0..self.len() {
            row.clear();
            for v in self.input(k).iter().chain(self.target(k)) {
                row.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&row)?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, DatasetError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(DatasetError::BadMagic);
        }
        let dim = read_u32(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let train_count = read_u64(&mut r)? as usize;
        if dim == 0 || train_count > m {
            return Err(DatasetError::Corrupt(format!(
                "N={dim}, M={m}, train={train_count}"
            )));
        }
        let mut norm_stats = Vec::with_capacity(dim);
        for _ in 0..dim {
            let min = read_f32(&mut r)?;
            let max = read_f32(&mut r)?;
            norm_stats.push(NormStats { min, max });
        }
        let mut buf = vec![0u8; m * dim * 8];
        r.read_exact(&mut buf)?;
        let mut inputs = Vec::with_capacity(m * dim);
        let mut targets = Vec::with_capacity(m * dim);
        for row in buf.chunks_exact(dim * 8) {
            let vals = row
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
            for (i, v) in vals.enumerate() {
                if i < dim {
                    inputs.push(v)
                } else {
                    targets.push(v)
                }
            }
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(DatasetError::Corrupt("trailing bytes".into()));
        }
        Ok(Self {
            dim,
            norm_stats,
            train_count,
            inputs,
            targets,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> io::Result<f32> {
    Ok(f32::from_bits(read_u32(r)?))
}

// Outward rounding keeps every training value inside [0, 1] after scaling.
fn round_down(v: f64) -> f32 {
    let f = v as f32;
    if f as f64 > v {
        f.next_down()
    } else {
        f
    }
}

fn round_up(v: f64) -> f32 {
    let f = v as f32;
    if (f as f64) < v {
        f.next_up()
    } else {
        f
    }
}

/// Pairs `(states[t], states[t+1])` with a chronological split. Normalization
/// stats are fitted on the training rows only and applied to every row.
pub fn build_dataset(
    trajectory: &Trajectory,
    split_ratio: f64,
    normalize: bool,
) -> Result<Dataset, DatasetError> {
    let len = trajectory.len();
    if len < 2 {
        return Err(DatasetError::TooShort(len));
    }
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(DatasetError::BadSplit(split_ratio));
    }
    let n = trajectory.dim;
    let m = len - 1;
    let train_count = (split_ratio * m as f64).round() as usize;

    let norm_stats = if normalize {
        // Training inputs are states[0..train_count], targets states[1..=train_count].
        let upto = train_count.max(1);
        (0..n)
            .map(|d| {
                let (lo, hi) = (0..=upto)
                    .map(|k| trajectory.state(k)[d])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                let stats = NormStats {
                    min: round_down(lo),
                    max: round_up(hi),
                };
                if stats.max > stats.min {
                    Ok(stats)
                } else {
                    Err(DatasetError::DegenerateDimension { dim: d })
                }
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![NormStats::IDENTITY; n]
    };

    let scaled: Vec<f32> = trajectory
        .states()
        .flat_map(|s| s.iter().zip(&norm_stats).map(|(v, st)| st.normalize(*v)))
        .collect();
    let inputs = scaled[..m * n].to_vec();
    let targets = scaled[n..].to_vec();
    Ok(Dataset {
        dim: n,
        norm_stats,
        train_count,
        inputs,
        targets,
    })
}
