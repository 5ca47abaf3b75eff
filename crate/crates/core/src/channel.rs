//! The many-access channel model: sizes, shared spherical codebook, active-set
//! selection and the additive white Gaussian noise channel.
//!
//! Codewords are generated per index from a dedicated ChaCha stream
//! `(seed, index)`, so a codebook of any size can be sampled lazily, in
//! parallel, or materialized, and always yields the same bits.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{check_unit_axis, fill_hemisphere, fill_uniform_sphere, SphereVector};
use crate::rng::{derive_seed, stream, StreamRng, StreamTag};
use crate::special::choose_f64;

/// How the active codewords are distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Every codeword uniform on the sphere.
    FullSphere,
    /// Active codewords uniform on the hemisphere about a fixed unit axis,
    /// inactive codewords uniform on the full sphere.
    HemisphereConditioned { axis: Vec<f64> },
}

/// Scalar model parameters and the derived codebook size `M_n` and active
/// user count `K_a`. Noise variance is 1 per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n: usize,
    pub d: f64,
    pub beta: f64,
    #[serde(rename = "P")]
    pub power: f64,
    pub sampling_mode: SamplingMode,
    pub codebook_size: usize,
    pub active_users: usize,
}

/// `M_n = round(n^d)` and `K_a = max(1, round(beta n))`.
pub fn derive_sizes(n: usize, d: f64, beta: f64) -> Result<(usize, usize)> {
    if n < 2 {
        return Err(invalid(format!("blocklength n = {n} must be >= 2")));
    }
    if !(d > 2.0) || !d.is_finite() {
        return Err(invalid(format!("codebook exponent d = {d} must be > 2")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("user density beta = {beta} must be > 0")));
    }
    let m = (n as f64).powf(d).round();
    if m >= usize::MAX as f64 {
        return Err(invalid(format!("codebook size n^d = {m:e} overflows")));
    }
    let m = m as usize;
    let k = ((beta * n as f64).round() as usize).max(1);
    if k > m {
        return Err(invalid(format!("K_a = {k} exceeds M_n = {m}")));
    }
    Ok((m, k))
}

impl ChannelParams {
    pub fn new(n: usize, d: f64, beta: f64, power: f64) -> Result<Self> {
        let (codebook_size, active_users) = derive_sizes(n, d, beta)?;
        check_power(power)?;
        Ok(Self {
            n,
            d,
            beta,
            power,
            sampling_mode: SamplingMode::FullSphere,
            codebook_size,
            active_users,
        })
    }

    /// Small diagnostic instances with explicit sizes (for example `n = 16`,
    /// `M = 32`), which need not satisfy `d > 2`. `d` and `beta` are filled
    /// with the values implied by the sizes.
    pub fn from_sizes(
        n: usize,
        codebook_size: usize,
        active_users: usize,
        power: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("blocklength n = {n} must be >= 2")));
        }
        if active_users == 0 || active_users > codebook_size {
            return Err(invalid(format!(
                "need 1 <= K_a <= M_n, got K_a = {active_users}, M_n = {codebook_size}"
            )));
        }
        check_power(power)?;
        Ok(Self {
            n,
            d: (codebook_size as f64).ln() / (n as f64).ln(),
            beta: active_users as f64 / n as f64,
            power,
            sampling_mode: SamplingMode::FullSphere,
            codebook_size,
            active_users,
        })
    }

    pub fn conditioned(mut self, axis: Vec<f64>) -> Result<Self> {
        if axis.len() != self.n {
            return Err(invalid(format!(
                "axis has dimension {}, expected {}",
                axis.len(),
                self.n
            )));
        }
        check_unit_axis(&axis)?;
        self.sampling_mode = SamplingMode::HemisphereConditioned { axis };
        Ok(self)
    }

    /// Conditioned mode about the first basis vector.
    pub fn conditioned_on_e1(self) -> Result<Self> {
        let mut axis = vec![0.0; self.n];
        axis[0] = 1.0;
        self.conditioned(axis)
    }

    pub fn radius(&self) -> f64 {
        (self.n as f64 * self.power).sqrt()
    }

    pub fn axis(&self) -> Option<&[f64]> {
        match &self.sampling_mode {
            SamplingMode::FullSphere => None,
            SamplingMode::HemisphereConditioned { axis } => Some(axis),
        }
    }

    /// `beta < 1/4`, the necessary condition for reliable decoding. Informational.
    pub fn reliable_decoding_possible(&self) -> bool {
        self.beta < 0.25
    }
}

fn check_power(power: f64) -> Result<()> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(invalid(format!("power P = {power} must be > 0")));
    }
    Ok(())
}

/// The shared codebook `{x_m : m < M_n}` with `|x_m|^2 = nP` exactly (to
/// rounding). Rows are generated on demand unless [`Codebook::materialize`]
/// has been called.
#[derive(Debug, Clone)]
pub struct Codebook {
    params: ChannelParams,
    seed: u64,
    base_rng: StreamRng,
    hemisphere_members: Vec<usize>,
    rows: Option<Vec<f64>>,
}

impl Codebook {
    /// Lazy codebook. In conditioned mode no codeword is hemisphere-drawn
    /// until [`Codebook::with_hemisphere_members`] designates the active ones.
    pub fn generate(params: &ChannelParams, seed: u64) -> Self {
        Self {
            params: params.clone(),
            seed,
            base_rng: stream(derive_seed(seed, 0, StreamTag::Codebook)),
            hemisphere_members: Vec::new(),
            rows: None,
        }
    }

    /// Designates the indices whose codewords are drawn from the hemisphere
    /// about the conditioning axis.
    pub fn with_hemisphere_members(mut self, members: &[usize]) -> Result<Self> {
        if self.params.axis().is_none() {
            return Err(invalid(
                "hemisphere members require conditioned sampling mode",
            ));
        }
        let sorted = validate_index_set(members, self.params.codebook_size)?;
        self.hemisphere_members = sorted;
        self.rows = None;
        Ok(self)
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn size(&self) -> usize {
        self.params.codebook_size
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    pub fn radius(&self) -> f64 {
        self.params.radius()
    }

    pub fn hemisphere_members(&self) -> &[usize] {
        &self.hemisphere_members
    }

    pub fn is_materialized(&self) -> bool {
        self.rows.is_some()
    }

    /// Generates and stores every row. Parallel over indices; the result does
    /// not depend on the number of workers.
    pub fn materialize(&mut self) -> Result<()> {
        if self.rows.is_some() {
            return Ok(());
        }
        let n = self.dim();
        let mut rows = vec![0.0; n * self.size()];
        rows.par_chunks_mut(n)
            .enumerate()
            .try_for_each(|(m, out)| self.generate_row(m, out))?;
        self.rows = Some(rows);
        Ok(())
    }

    fn generate_row(&self, m: usize, out: &mut [f64]) -> Result<()> {
        let mut rng = self.base_rng.clone();
        rng.set_stream(m as u64);
        let radius = self.radius();
        match self.params.axis() {
            Some(axis) if self.hemisphere_members.binary_search(&m).is_ok() => {
                fill_hemisphere(out, radius, axis, &mut rng)
            }
            _ => fill_uniform_sphere(out, radius, &mut rng),
        }
    }

    /// Writes codeword `m` into `out` (length `n`).
    pub fn write_codeword(&self, m: usize, out: &mut [f64]) -> Result<()> {
        if m >= self.size() {
            return Err(invalid(format!(
                "codeword index {m} out of range (M_n = {})",
                self.size()
            )));
        }
        if out.len() != self.dim() {
            return Err(invalid("output buffer has the wrong length"));
        }
        match &self.rows {
            Some(rows) => {
                let n = self.dim();
                out.copy_from_slice(&rows[m * n..(m + 1) * n]);
                Ok(())
            }
            None => self.generate_row(m, out),
        }
    }

    pub fn codeword(&self, m: usize) -> Result<SphereVector> {
        let mut out = vec![0.0; self.dim()];
        self.write_codeword(m, &mut out)?;
        SphereVector::new(out, self.radius())
    }

    /// Stored row `m`, if materialized.
    pub fn row(&self, m: usize) -> Option<&[f64]> {
        let n = self.dim();
        self.rows.as_ref().map(|r| &r[m * n..(m + 1) * n])
    }

    /// Rows for `indices`, concatenated in the given order.
    pub fn rows_for(&self, indices: &[usize]) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![0.0; n * indices.len()];
        out.par_chunks_mut(n)
            .zip(indices.par_iter())
            .try_for_each(|(chunk, &m)| self.write_codeword(m, chunk))?;
        Ok(out)
    }
}

/// Materialized codebook. In conditioned mode the designated active set must
/// be supplied so its codewords are hemisphere-drawn.
pub fn build_codebook(
    params: &ChannelParams,
    seed: u64,
    conditioned_active: Option<&[usize]>,
) -> Result<Codebook> {
    let mut cb = Codebook::generate(params, seed);
    match (params.axis(), conditioned_active) {
        (Some(_), Some(active)) => cb = cb.with_hemisphere_members(active)?,
        (Some(_), None) => {
            return Err(invalid(
                "conditioned mode needs the active set to draw hemisphere codewords",
            ))
        }
        (None, Some(_)) => {
            return Err(invalid("active set given but sampling mode is full-sphere"))
        }
        (None, None) => {}
    }
    cb.materialize()?;
    Ok(cb)
}

fn validate_index_set(indices: &[usize], size: usize) -> Result<Vec<usize>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("index set contains duplicates"));
    }
    if let Some(&last) = sorted.last() {
        if last >= size {
            return Err(invalid(format!("index {last} out of range (M_n = {size})")));
        }
    }
    Ok(sorted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveSetMode {
    /// Uniform `K_a`-subset of `[M_n]`.
    DistinctSubset,
    /// `K_a` i.i.d. uniform messages; repeats are a collision.
    IidMessages,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    /// Sorted, deduplicated indices.
    pub indices: Vec<usize>,
    /// Whether two users picked the same message (IidMessages only).
    pub collision: bool,
}

pub fn draw_active_set<R: Rng + ?Sized>(
    params: &ChannelParams,
    rng: &mut R,
    mode: ActiveSetMode,
) -> ActiveSet {
    let (m, k) = (params.codebook_size, params.active_users);
    match mode {
        ActiveSetMode::DistinctSubset => {
            let mut indices = index::sample(rng, m, k).into_vec();
            indices.sort_unstable();
            ActiveSet {
                indices,
                collision: false,
            }
        }
        ActiveSetMode::IidMessages => {
            let mut indices: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
            indices.sort_unstable();
            indices.dedup();
            ActiveSet {
                collision: indices.len() < k,
                indices,
            }
        }
    }
}

/// Upper bounds on the message-collision probability under i.i.d. message
/// selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionBound {
    /// `C(K_a, 2) / M_n`.
    pub pairwise: f64,
    /// `beta^2 n^2 / (2 n^d)`.
    pub loose: f64,
}

pub fn collision_bound(params: &ChannelParams) -> CollisionBound {
    let n = params.n as f64;
    CollisionBound {
        pairwise: choose_f64(params.active_users as u64, 2) / params.codebook_size as f64,
        loose: params.beta * params.beta * n * n / (2.0 * n.powf(params.d)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    Standard,
    /// Zero noise; diagnostics only.
    Suppressed,
}

/// One channel use: `y = sum_{m in S} x_m + Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<f64>,
    pub active_set: Vec<usize>,
    pub axis: Option<Vec<f64>>,
    pub noise_seed: u64,
}

pub fn transmit(codebook: &Codebook, active_set: &[usize], noise_seed: u64) -> Result<Observation> {
    transmit_with(codebook, active_set, noise_seed, NoiseMode::Standard)
}

pub fn transmit_with(
    codebook: &Codebook,
    active_set: &[usize],
    noise_seed: u64,
    noise: NoiseMode,
) -> Result<Observation> {
    let active = validate_index_set(active_set, codebook.size())?;
    if active.len() != codebook.params().active_users {
        return Err(invalid(format!(
            "active set has {} indices, K_a = {}",
            active.len(),
            codebook.params().active_users
        )));
    }
    if codebook.params().axis().is_some() && codebook.hemisphere_members() != active.as_slice() {
        return Err(invalid(
            "conditioned codebook was drawn for a different active set",
        ));
    }
    let rows = codebook.rows_for(&active)?;
    let y = superpose(&rows, codebook.dim(), noise_seed, noise);
    Ok(Observation {
        y,
        active_set: active,
        axis: codebook.params().axis().map(<[f64]>::to_vec),
        noise_seed,
    })
}

/// Sum of the given rows (in order) plus the noise drawn from `noise_seed`.
pub(crate) fn superpose(rows: &[f64], n: usize, noise_seed: u64, noise: NoiseMode) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for row in rows.chunks_exact(n) {
        for (acc, x) in y.iter_mut().zip(row) {
            *acc += x;
        }
    }
    if noise == NoiseMode::Standard {
        let mut rng = stream(noise_seed);
        for acc in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *acc += z;
        }
    }
    y
}
