//! Geometry of a set of user codebooks and their superposition.

use crate::error::{Error, Result};
use crate::modem::{Codebook, SuperposedConstellation};
use crate::textfmt::{fmt_f64, fmt_f64s};

/// Element power below which a codeword element counts as a zero-power point.
pub const ZERO_POWER_EPS: f64 = 1e-9;
/// Points closer than this are counted as one distinct point.
pub const DISTINCT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookMetrics {
    /// Average codebook power `P^(j)` per user.
    pub user_powers: Vec<f64>,
    pub intra_min_distance: Vec<f64>,
    pub intra_max_distance: Vec<f64>,
    /// Minimum distance between superposed points with different labels.
    pub superposed_min_distance: f64,
    pub distinct_points: usize,
    /// Users with any non-zero element on each resource.
    pub users_per_resource: Vec<usize>,
    /// Codeword elements of those users with (near) zero power, per resource.
    pub zero_power_elements: Vec<usize>,
}

impl CodebookMetrics {
    /// `max_j P^(j) / min_j P^(j)`, or 1 without user codebooks.
    pub fn power_ratio(&self) -> f64 {
        if self.user_powers.is_empty() {
            return 1.0;
        }
        let max = self.user_powers.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.user_powers.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn to_text(&self, provenance: &str) -> String {
        let mut out = String::new();
        for line in provenance.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let ints = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str("[metrics]\n");
        out.push_str(&format!("user_powers = {}\n", fmt_f64s(&self.user_powers)));
        out.push_str(&format!("intra_min_distance = {}\n", fmt_f64s(&self.intra_min_distance)));
        out.push_str(&format!("intra_max_distance = {}\n", fmt_f64s(&self.intra_max_distance)));
        out.push_str(&format!("superposed_min_distance = {}\n", fmt_f64(self.superposed_min_distance)));
        out.push_str(&format!("distinct_points = {}\n", self.distinct_points));
        out.push_str(&format!("users_per_resource = {}\n", ints(&self.users_per_resource)));
        out.push_str(&format!("zero_power_elements = {}\n", ints(&self.zero_power_elements)));
        out
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-user fields are empty when `codebooks` is empty, as for a joint
/// constellation without user codebooks.
pub fn codebook_metrics(
    codebooks: &[Codebook],
    constellation: &SuperposedConstellation,
) -> Result<CodebookMetrics> {
    if let Some(cb) = codebooks.iter().find(|cb| cb.order() != constellation.order()) {
        return Err(Error::config(format!("user {} codebook order does not match the constellation", cb.user)));
    }
    let resources = constellation.resources();
    let mut intra_min = Vec::new();
    let mut intra_max = Vec::new();
    for cb in codebooks {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (a, ca) in cb.codewords.iter().enumerate() {
            for cw in &cb.codewords[a + 1..] {
                let d = dist(ca.as_slice(), cw.as_slice());
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        intra_min.push(lo);
        intra_max.push(hi);
    }

    let mut users_per_resource = vec![0; resources];
    let mut zero_power_elements = vec![0; resources];
    for (k, (users, zeros)) in users_per_resource
        .iter_mut()
        .zip(zero_power_elements.iter_mut())
        .enumerate()
    {
        for cb in codebooks {
            let powers: Vec<f64> = cb.codewords.iter().map(|c| c.element_power(k)).collect();
            if powers.iter().any(|&p| p > ZERO_POWER_EPS) {
                *users += 1;
                *zeros += powers.iter().filter(|&&p| p <= ZERO_POWER_EPS).count();
            }
        }
    }

    let n = constellation.len();
    let mut min_d = f64::INFINITY;
    let mut distinct = 0;
    for i in 0..n {
        let xi = constellation.point(i);
        let mut is_new = true;
        for k in 0..n {
            if k == i {
                continue;
            }
            let d = dist(xi, constellation.point(k));
            if k > i && constellation.label(k) != constellation.label(i) {
                min_d = min_d.min(d);
            }
            if k < i && d <= DISTINCT_EPS {
                is_new = false;
            }
        }
        if is_new {
            distinct += 1;
        }
    }

    Ok(CodebookMetrics {
        user_powers: codebooks.iter().map(Codebook::average_power).collect(),
        intra_min_distance: intra_min,
        intra_max_distance: intra_max,
        superposed_min_distance: if min_d.is_finite() { min_d } else { 0.0 },
        distinct_points: distinct,
        users_per_resource,
        zero_power_elements,
    })
}
