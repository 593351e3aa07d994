//! The communication graph: one-hot inputs, per-user codeword generation,
//! power normalization, superposition, AWGN and the neural multi-user
//! decoder.
//!
//! Complex vectors of length `K` are packed as `2K` reals ordered
//! `(Re₁, Im₁, …, Re_K, Im_K)`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::nn::{init_network, DenseNetwork, NetworkSpec, Trace};
use crate::rng::{Domain, RngStream};
use crate::system::{PnlLevel, SystemConfig};

/// Raw powers below this are treated as a collapsed encoder.
pub const MIN_RAW_POWER: f64 = 1e-30;

/// Concatenated per-user one-hot vectors, stored as symbol indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotInput {
    order: usize,
    symbols: Vec<usize>,
}

impl OneHotInput {
    pub fn from_symbols(order: usize, symbols: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= order) {
            return Err(Error::config(format!("symbol {bad} out of range for order {order}")));
        }
        Ok(Self { order, symbols })
    }

    pub fn from_label(config: &SystemConfig, label: usize) -> Self {
        Self {
            order: config.order(),
            symbols: config.symbols_of(label),
        }
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn users(&self) -> usize {
        self.symbols.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// One-hot sub-vector of `user`.
    pub fn user_vector(&self, user: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.order];
        v[self.symbols[user]] = 1.0;
        v
    }

    /// The full length-`M·J` vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.order * self.symbols.len()];
        for (j, &s) in self.symbols.iter().enumerate() {
            v[j * self.order + s] = 1.0;
        }
        v
    }

    pub fn to_bits(&self, config: &SystemConfig) -> Vec<u8> {
        config.label_to_bits(config.label_of(&self.symbols))
    }
}

/// Maps a `J·log2 M` bit vector to its one-hot input.
pub fn encode_bits_to_onehot(bits: &[u8], config: &SystemConfig) -> Result<OneHotInput> {
    let label = config.bits_to_label(bits)?;
    Ok(OneHotInput::from_label(config, label))
}

/// A complex `K`-vector in packed real form.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(Vec<f64>);

impl Codeword {
    pub fn zeros(resources: usize) -> Self {
        Codeword(vec![0.0; 2 * resources])
    }

    pub fn from_packed(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::config("packed codeword must have even length"));
        }
        Ok(Codeword(values))
    }

    pub fn resources(&self) -> usize {
        self.0.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn element(&self, k: usize) -> (f64, f64) {
        (self.0[2 * k], self.0[2 * k + 1])
    }

    pub fn element_power(&self, k: usize) -> f64 {
        let (re, im) = self.element(k);
        re * re + im * im
    }

    pub fn power(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Codewords for every (user, symbol) pair, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordTable {
    users: usize,
    order: usize,
    resources: usize,
    data: Vec<f64>,
}

impl CodewordTable {
    pub fn zeros(users: usize, order: usize, resources: usize) -> Self {
        Self {
            users,
            order,
            resources,
            data: vec![0.0; users * order * 2 * resources],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    #[inline]
    pub fn get(&self, user: usize, symbol: usize) -> &[f64] {
        let w = 2 * self.resources;
        let start = (user * self.order + symbol) * w;
        &self.data[start..start + w]
    }

    #[inline]
    pub fn get_mut(&mut self, user: usize, symbol: usize) -> &mut [f64] {
        let w = 2 * self.resources;
        let start = (user * self.order + symbol) * w;
        &mut self.data[start..start + w]
    }

    pub fn codeword(&self, user: usize, symbol: usize) -> Codeword {
        Codeword(self.get(user, symbol).to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `P^(j)`: mean squared norm over the user's `M` codewords.
    pub fn user_power(&self, user: usize) -> f64 {
        (0..self.order)
            .map(|m| self.get(user, m).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / self.order as f64
    }

    pub fn user_powers(&self) -> Vec<f64> {
        (0..self.users).map(|j| self.user_power(j)).collect()
    }

    /// Sum of codewords selected by `label`, written into `out` (length 2K).
    pub fn superpose_label(&self, config: &SystemConfig, label: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.users {
            let cw = self.get(j, config.symbol_of(label, j));
            for (o, c) in out.iter_mut().zip(cw) {
                *o += c;
            }
        }
    }
}

/// Power normalization fitted to a raw codeword table.
///
/// Levels 1 and 2 act on each codeword independently. Level 3 uses one
/// scale factor for every user, computed from the users' codebook-average
/// powers, so a user's codeword still depends on its own input only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerNormalizer {
    level: PnlLevel,
    power: f64,
    per_user: usize,
    common_scale: f64,
}

impl PowerNormalizer {
    pub fn fit(raw: &CodewordTable, config: &SystemConfig) -> Result<Self> {
        if raw.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("raw encoder output".into()));
        }
        let common_scale = match config.pnl() {
            PnlLevel::SumPower => {
                let total: f64 = raw.user_powers().iter().sum();
                if total.is_infinite() {
                    return Err(Error::NonFinite("sum of codebook powers overflows".into()));
                }
                if !(total >= MIN_RAW_POWER) {
                    return Err(Error::DegeneratePower(format!(
                        "sum of codebook powers is {total:e}"
                    )));
                }
                (config.users() as f64 * config.power() / total).sqrt()
            }
            _ => 1.0,
        };
        Ok(Self {
            level: config.pnl(),
            power: config.power(),
            per_user: config.per_user(),
            common_scale,
        })
    }

    pub fn common_scale(&self) -> f64 {
        self.common_scale
    }

    /// Normalizes one raw codeword in place.
    pub fn normalize(&self, codeword: &mut [f64]) -> Result<()> {
        match self.level {
            PnlLevel::Element => {
                let target = (self.power / self.per_user as f64).sqrt();
                for pair in codeword.chunks_exact_mut(2) {
                    let p = pair[0] * pair[0] + pair[1] * pair[1];
                    if p == 0.0 {
                        // bypassed element
                        continue;
                    }
                    if p < MIN_RAW_POWER {
                        return Err(Error::DegeneratePower(format!("element power {p:e}")));
                    }
                    let f = target / p.sqrt();
                    pair[0] *= f;
                    pair[1] *= f;
                }
            }
            PnlLevel::Codeword => {
                let p: f64 = codeword.iter().map(|v| v * v).sum();
                if p < MIN_RAW_POWER {
                    return Err(Error::DegeneratePower(format!("codeword power {p:e}")));
                }
                let f = (self.power / p).sqrt();
                codeword.iter_mut().for_each(|v| *v *= f);
            }
            PnlLevel::SumPower => codeword.iter_mut().for_each(|v| *v *= self.common_scale),
        }
        Ok(())
    }
}

/// Applies the configured power normalization to every codeword of `raw`.
pub fn apply_pnl(raw: &CodewordTable, config: &SystemConfig) -> Result<CodewordTable> {
    let normalizer = PowerNormalizer::fit(raw, config)?;
    let mut out = raw.clone();
    for chunk in out.data.chunks_exact_mut(2 * raw.resources) {
        normalizer.normalize(chunk)?;
    }
    Ok(out)
}

/// Gradient of a scalar loss with respect to the raw table, given its
/// gradient with respect to the normalized table.
pub fn pnl_backward(
    raw: &CodewordTable,
    grad_normalized: &CodewordTable,
    config: &SystemConfig,
) -> Result<CodewordTable> {
    check_dim("pnl gradient", raw.data.len(), grad_normalized.data.len())?;
    let mut out = CodewordTable::zeros(raw.users, raw.order, raw.resources);
    let w = 2 * raw.resources;
    match config.pnl() {
        PnlLevel::Element => {
            let target = (config.power() / config.per_user() as f64).sqrt();
            for ((z, g), dz) in raw
                .data
                .chunks_exact(2)
                .zip(grad_normalized.data.chunks_exact(2))
                .zip(out.data.chunks_exact_mut(2))
            {
                if z[0] == 0.0 && z[1] == 0.0 {
                    continue;
                }
                fixed_norm_backward(z, g, target, dz);
            }
        }
        PnlLevel::Codeword => {
            let target = config.power().sqrt();
            for ((z, g), dz) in raw
                .data
                .chunks_exact(w)
                .zip(grad_normalized.data.chunks_exact(w))
                .zip(out.data.chunks_exact_mut(w))
            {
                fixed_norm_backward(z, g, target, dz);
            }
        }
        PnlLevel::SumPower => {
            let scale = PowerNormalizer::fit(raw, config)?.common_scale();
            common_scale_backward(&raw.data, &grad_normalized.data, scale, &mut out.data);
        }
    }
    Ok(out)
}

/// Backward pass of `s = target · z / ‖z‖`.
fn fixed_norm_backward(z: &[f64], g: &[f64], target: f64, dz: &mut [f64]) {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        dz.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let proj: f64 = z.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / (norm * norm);
    let f = target / norm;
    for ((d, &zi), &gi) in dz.iter_mut().zip(z).zip(g) {
        *d = f * (gi - proj * zi);
    }
}

/// Backward pass of `s = c(Z) · z` where `c = sqrt(budget / mean‖z‖²)` and
/// the mean runs over all of `z`. Holds for any averaging constant.
pub(crate) fn common_scale_backward(z: &[f64], g: &[f64], scale: f64, dz: &mut [f64]) {
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let gz: f64 = z.iter().zip(g).map(|(a, b)| a * b).sum();
    let proj = if zz > 0.0 { gz / zz } else { 0.0 };
    for ((d, &zi), &gi) in dz.iter_mut().zip(z).zip(g) {
        *d = scale * (gi - proj * zi);
    }
}

/// Layer widths for encoder and decoder networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub encoder_width: usize,
    pub encoder_layers: usize,
    pub decoder_width: usize,
    pub decoder_layers: usize,
}

/// Multi-user encoder: one element generator per active (user, resource).
#[derive(Debug, Clone, PartialEq)]
pub struct MuEncoder {
    config: SystemConfig,
    generators: Vec<Option<DenseNetwork>>,
}

/// Single-user (genie) encoder mapping all users' inputs to one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SuEncoder {
    config: SystemConfig,
    net: DenseNetwork,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderStack {
    MultiUser(MuEncoder),
    SingleUser(SuEncoder),
}

impl MuEncoder {
    pub fn new(config: &SystemConfig, width: usize, layers: usize, seed: u64) -> Result<Self> {
        let k_total = config.resources();
        let spec = NetworkSpec::tanh_mlp(config.order(), width, layers, 2);
        let mut generators = Vec::with_capacity(config.users() * k_total);
        for j in 0..config.users() {
            for k in 0..k_total {
                if config.mapping().get(k, j) {
                    let mut rng =
                        RngStream::for_domain(seed, Domain::Init, 1, (j * k_total + k) as u64);
                    generators.push(Some(init_network(&spec, &mut rng)?));
                } else {
                    generators.push(None);
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            generators,
        })
    }

    pub fn from_generators(config: &SystemConfig, generators: Vec<Option<DenseNetwork>>) -> Result<Self> {
        check_dim(
            "generator count",
            config.users() * config.resources(),
            generators.len(),
        )?;
        for j in 0..config.users() {
            for k in 0..config.resources() {
                let g = &generators[j * config.resources() + k];
                match (config.mapping().get(k, j), g) {
                    (true, Some(net)) => {
                        check_dim("generator input", config.order(), net.input_dim())?;
                        check_dim("generator output", 2, net.output_dim())?;
                    }
                    (false, None) => {}
                    (true, None) => {
                        return Err(Error::config(format!("missing generator for user {j}, resource {k}")))
                    }
                    (false, Some(_)) => {
                        return Err(Error::config(format!(
                            "generator present for unmapped user {j}, resource {k}"
                        )))
                    }
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            generators,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn generator(&self, user: usize, resource: usize) -> Option<&DenseNetwork> {
        self.generators[user * self.config.resources() + resource].as_ref()
    }

    pub fn generators(&self) -> &[Option<DenseNetwork>] {
        &self.generators
    }

    pub(crate) fn generators_mut(&mut self) -> &mut [Option<DenseNetwork>] {
        &mut self.generators
    }

    pub fn parameter_count(&self) -> usize {
        self.generators.iter().flatten().map(|g| g.parameter_count()).sum()
    }

    /// Raw (pre-normalization) codeword of one user for a one-hot input.
    pub fn raw_codeword(&self, user: usize, onehot: &[f64]) -> Result<Codeword> {
        check_dim("user one-hot", self.config.order(), onehot.len())?;
        let mut cw = Codeword::zeros(self.config.resources());
        for k in 0..self.config.resources() {
            if let Some(net) = self.generator(user, k) {
                let out = net.forward(onehot)?;
                cw.0[2 * k] = out[0];
                cw.0[2 * k + 1] = out[1];
            }
        }
        Ok(cw)
    }

    /// All raw codewords, batched per generator. Also returns the traces
    /// needed for backpropagation.
    pub(crate) fn raw_table_traced(&self) -> Result<(CodewordTable, Vec<Option<Trace>>)> {
        let m = self.config.order();
        let k_total = self.config.resources();
        let eye = Array2::<f64>::eye(m);
        let mut table = CodewordTable::zeros(self.config.users(), m, k_total);
        let mut traces = Vec::with_capacity(self.generators.len());
        for (idx, g) in self.generators.iter().enumerate() {
            let (j, k) = (idx / k_total, idx % k_total);
            match g {
                Some(net) => {
                    let trace = net.forward_batch(eye.view())?;
                    for s in 0..m {
                        let row = trace.output().row(s);
                        let cw = table.get_mut(j, s);
                        cw[2 * k] = row[0];
                        cw[2 * k + 1] = row[1];
                    }
                    traces.push(Some(trace));
                }
                None => traces.push(None),
            }
        }
        Ok((table, traces))
    }

    pub fn raw_table(&self) -> Result<CodewordTable> {
        Ok(self.raw_table_traced()?.0)
    }

    /// Normalized codewords for every (user, symbol).
    pub fn codeword_table(&self) -> Result<CodewordTable> {
        apply_pnl(&self.raw_table()?, &self.config)
    }
}

/// Pre-normalization codewords of all users for one input. User `j`'s
/// codeword is computed from `r^(j)` alone.
pub fn mu_encode(encoder: &MuEncoder, input: &OneHotInput) -> Result<Vec<Codeword>> {
    check_dim("input users", encoder.config.users(), input.users())?;
    check_dim("input order", encoder.config.order(), input.order())?;
    (0..input.users())
        .map(|j| encoder.raw_codeword(j, &input.user_vector(j)))
        .collect()
}

impl SuEncoder {
    pub fn new(config: &SystemConfig, width: usize, layers: usize, seed: u64) -> Result<Self> {
        let spec = NetworkSpec::tanh_mlp(
            config.order() * config.users(),
            width,
            layers,
            2 * config.resources(),
        );
        let mut rng = RngStream::for_domain(seed, Domain::Init, 2, 0);
        Ok(Self {
            config: config.clone(),
            net: init_network(&spec, &mut rng)?,
        })
    }

    pub fn from_network(config: &SystemConfig, net: DenseNetwork) -> Result<Self> {
        check_dim("su encoder input", config.order() * config.users(), net.input_dim())?;
        check_dim("su encoder output", 2 * config.resources(), net.output_dim())?;
        Ok(Self {
            config: config.clone(),
            net,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn network(&self) -> &DenseNetwork {
        &self.net
    }

    pub(crate) fn network_mut(&mut self) -> &mut DenseNetwork {
        &mut self.net
    }

    /// Unnormalized outputs for every label, one row per label.
    pub fn raw_outputs(&self) -> Result<Array2<f64>> {
        let n = self.config.num_labels();
        let m = self.config.order();
        let mut inputs = Array2::<f64>::zeros((n, m * self.config.users()));
        for label in 0..n {
            for j in 0..self.config.users() {
                inputs[[label, j * m + self.config.symbol_of(label, j)]] = 1.0;
            }
        }
        Ok(self.net.forward_batch(inputs.view())?.output().clone())
    }

    /// Factor that brings the average power over all `M^J` outputs to `J·P`.
    pub fn normalization_scale(&self) -> Result<f64> {
        let raw = self.raw_outputs()?;
        let mean = raw.iter().map(|v| v * v).sum::<f64>() / raw.nrows() as f64;
        if !(mean >= MIN_RAW_POWER) {
            return Err(Error::DegeneratePower(format!("mean output power {mean:e}")));
        }
        Ok((self.config.users() as f64 * self.config.power() / mean).sqrt())
    }
}

/// Normalized single-user encoder output for one input.
pub fn su_encode(encoder: &SuEncoder, input: &OneHotInput) -> Result<Codeword> {
    check_dim("input users", encoder.config.users(), input.users())?;
    let scale = encoder.normalization_scale()?;
    let mut out = encoder.net.forward(&input.to_vec())?;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(Codeword(out))
}

impl EncoderStack {
    pub fn config(&self) -> &SystemConfig {
        match self {
            EncoderStack::MultiUser(e) => &e.config,
            EncoderStack::SingleUser(e) => &e.config,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            EncoderStack::MultiUser(e) => e.parameter_count(),
            EncoderStack::SingleUser(e) => e.net.parameter_count(),
        }
    }

    /// The superposed constellation the encoder currently produces.
    pub fn constellation(&self) -> Result<SuperposedConstellation> {
        match self {
            EncoderStack::MultiUser(e) => Ok(extract_codebooks(e)?.1),
            EncoderStack::SingleUser(e) => {
                let scale = e.normalization_scale()?;
                let mut raw = e.raw_outputs()?;
                raw.mapv_inplace(|v| v * scale);
                let cfg = &e.config;
                let energy = cfg.users() as f64 * cfg.power();
                SuperposedConstellation::from_points(
                    cfg.users(),
                    cfg.order(),
                    cfg.resources(),
                    raw.into_raw_vec_and_offset().0,
                    (0..cfg.num_labels() as u64).collect(),
                    energy,
                )
            }
        }
    }
}

/// Elementwise complex sum of codewords.
pub fn superpose(codewords: &[Codeword]) -> Result<Codeword> {
    let first = codewords
        .first()
        .ok_or_else(|| Error::config("nothing to superpose"))?;
    let mut out = Codeword::zeros(first.resources());
    for cw in codewords {
        check_dim("superposed codeword", out.0.len(), cw.0.len())?;
        for (o, v) in out.0.iter_mut().zip(&cw.0) {
            *o += v;
        }
    }
    Ok(out)
}

/// Adds `CN(0, σ²)` noise to every complex entry, in place.
pub fn add_awgn<R: Rng + ?Sized>(packed: &mut [f64], noise_power: f64, rng: &mut R) {
    let sd = (noise_power / 2.0).sqrt();
    if sd == 0.0 {
        return;
    }
    for v in packed {
        let n: f64 = rng.sample(StandardNormal);
        *v += sd * n;
    }
}

/// `y = x + n` with `n ~ CN(0, σ² I)`.
pub fn awgn_corrupt<R: Rng + ?Sized>(x: &Codeword, noise_power: f64, rng: &mut R) -> Result<Codeword> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(Error::config(format!(
            "noise power must be a non-negative finite number, got {noise_power}"
        )));
    }
    let mut y = x.clone();
    add_awgn(&mut y.0, noise_power, rng);
    Ok(y)
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Output of the neural multi-user decoder for one received vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub scores: Vec<f64>,
    pub symbols: Vec<usize>,
    pub label: usize,
}

impl Decision {
    pub fn user_scores(&self, user: usize, order: usize) -> &[f64] {
        &self.scores[user * order..(user + 1) * order]
    }

    pub fn bits(&self, config: &SystemConfig) -> Vec<u8> {
        config.label_to_bits(self.label)
    }
}

pub fn decode(decoder: &DenseNetwork, y: &Codeword, config: &SystemConfig) -> Result<Decision> {
    check_dim("decoder input", 2 * config.resources(), decoder.input_dim())?;
    check_dim("decoder output", config.order() * config.users(), decoder.output_dim())?;
    let scores = decoder.forward(y.as_slice())?;
    let symbols: Vec<usize> = scores.chunks_exact(config.order()).map(argmax).collect();
    let label = config.label_of(&symbols);
    Ok(Decision {
        scores,
        symbols,
        label,
    })
}

/// One user's codebook: `M` codewords and their bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub user: usize,
    pub codewords: Vec<Codeword>,
    /// `labels[m]` is the `log2 M`-bit pattern carried by codeword `m`.
    pub labels: Vec<u32>,
}

impl Codebook {
    /// Codebook with the natural map: symbol index `m` carries bits of `m`.
    pub fn natural(user: usize, codewords: Vec<Codeword>) -> Self {
        let labels = (0..codewords.len() as u32).collect();
        Self {
            user,
            codewords,
            labels,
        }
    }

    pub fn order(&self) -> usize {
        self.codewords.len()
    }

    pub fn average_power(&self) -> f64 {
        self.codewords.iter().map(Codeword::power).sum::<f64>() / self.codewords.len() as f64
    }
}

/// All `M^J` superposed points with their `J·log2 M`-bit labels.
///
/// Point `i` is the transmission whose symbol indices are the base-`M`
/// digits of `i`; `labels[i]` is the bit pattern it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperposedConstellation {
    users: usize,
    order: usize,
    resources: usize,
    points: Vec<f64>,
    labels: Vec<u64>,
    energy: f64,
}

impl SuperposedConstellation {
    /// `energy` is the total transmitted energy per channel use, used as
    /// the numerator of Eb.
    pub fn from_points(
        users: usize,
        order: usize,
        resources: usize,
        points: Vec<f64>,
        labels: Vec<u64>,
        energy: f64,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::config("empty constellation"));
        }
        check_dim("constellation points", n * 2 * resources, points.len())?;
        let expected = (order as u64).checked_pow(users as u32).unwrap_or(u64::MAX);
        if n as u64 != expected {
            return Err(Error::config(format!(
                "constellation has {n} points, expected M^J = {expected}"
            )));
        }
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::config(format!("constellation energy must be positive, got {energy}")));
        }
        Ok(Self {
            users,
            order,
            resources,
            points,
            labels,
            energy,
        })
    }

    pub fn from_codebooks(codebooks: &[Codebook]) -> Result<Self> {
        let first = codebooks
            .first()
            .ok_or_else(|| Error::config("no codebooks"))?;
        let users = codebooks.len();
        let order = first.order();
        let resources = first.codewords[0].resources();
        let bps = order.trailing_zeros();
        for cb in codebooks {
            check_dim("codebook order", order, cb.order())?;
            check_dim("codebook labels", order, cb.labels.len())?;
            for cw in &cb.codewords {
                check_dim("codeword resources", resources, cw.resources())?;
            }
        }
        let n = order.pow(users as u32);
        let w = 2 * resources;
        let mut points = vec![0.0; n * w];
        let mut labels = vec![0u64; n];
        for i in 0..n {
            let point = &mut points[i * w..(i + 1) * w];
            let mut bits = 0u64;
            for (j, cb) in codebooks.iter().enumerate() {
                let shift = (users - 1 - j) as u32 * bps;
                let s = (i >> shift) & (order - 1);
                for (p, v) in point.iter_mut().zip(cb.codewords[s].as_slice()) {
                    *p += v;
                }
                bits = (bits << bps) | cb.labels[s] as u64;
            }
            labels[i] = bits;
        }
        let energy = codebooks.iter().map(Codebook::average_power).sum();
        Self::from_points(users, order, resources, points, labels, energy)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    /// Real dimension of each point (`2K`).
    pub fn dim(&self) -> usize {
        2 * self.resources
    }

    pub fn bits_per_point(&self) -> usize {
        self.users * self.order.trailing_zeros() as usize
    }

    #[inline]
    pub fn point(&self, index: usize) -> &[f64] {
        let w = self.dim();
        &self.points[index * w..(index + 1) * w]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    #[inline]
    pub fn label(&self, index: usize) -> u64 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Total transmitted energy per channel use (`Σ_j P^(j)`).
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Mean of `‖x‖²` over the points.
    pub fn mean_point_energy(&self) -> f64 {
        self.points.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// Energy per information bit.
    pub fn energy_per_bit(&self) -> f64 {
        self.energy / self.bits_per_point() as f64
    }

    /// Copy with every point scaled by `factor` (energy scales by its square).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|v| v * factor).collect(),
            energy: self.energy * factor * factor,
            ..self.clone()
        }
    }
}

/// Enumerates every user's codebook (after normalization, natural labels)
/// and all `M^J` superpositions.
pub fn extract_codebooks(encoder: &MuEncoder) -> Result<(Vec<Codebook>, SuperposedConstellation)> {
    let table = encoder.codeword_table()?;
    let codebooks: Vec<Codebook> = (0..table.users())
        .map(|j| Codebook::natural(j, (0..table.order()).map(|m| table.codeword(j, m)).collect()))
        .collect();
    let constellation = SuperposedConstellation::from_codebooks(&codebooks)?;
    Ok((codebooks, constellation))
}

/// Builds a fresh decoder for `config`.
pub fn new_decoder(config: &SystemConfig, width: usize, layers: usize, seed: u64) -> Result<DenseNetwork> {
    let spec = NetworkSpec::tanh_mlp(
        2 * config.resources(),
        width,
        layers,
        config.order() * config.users(),
    );
    init_network(&spec, &mut RngStream::for_domain(seed, Domain::Init, 0, 0))
}
