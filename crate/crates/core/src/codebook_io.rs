//! Codebook files.
//!
//! A codebook file carries the system dimensions, the resource mapping and
//! either one codebook per user or, for the single-user design, the joint
//! constellation directly. Numbers are written with 17 significant digits
//! after the leading one, so a write/read cycle is bit exact.
//!
//! ```text
//! # free-form provenance comments
//! format = noma-codebook 1
//! [system]
//! users = 6
//! resources = 4
//! per_user = 4
//! order = 4
//! power = 1.00000000000000000e0
//! pnl_level = 3
//! [mapping]
//! row 0 = 1 1 1 1 1 1
//! ...
//! [user 0]
//! codeword 0 = re_1 im_1 ... re_K im_K
//! label 0 = 0 0
//! ...
//! ```
//!
//! The joint form replaces the `[user j]` sections with one `[joint]`
//! section holding `energy`, `point i` and `label i` for every `i < M^J`.
//! Third-party codebooks are imported by writing them in this format.

use std::fs;
use std::path::Path;

use crate::error::{check_dim, Error, Result};
use crate::modem::{extract_codebooks, Codebook, Codeword, MuEncoder, SuperposedConstellation};
use crate::system::{MappingMatrix, PnlLevel, SystemConfig};
use crate::textfmt::{fmt_f64, fmt_f64s, Document, Section};

pub const FORMAT_TAG: &str = "noma-codebook 1";

#[derive(Debug, Clone, PartialEq)]
pub enum CodebookData {
    PerUser(Vec<Codebook>),
    Joint(SuperposedConstellation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookFile {
    pub config: SystemConfig,
    pub data: CodebookData,
}

fn bits_string(value: u64, width: usize) -> String {
    (0..width)
        .map(|i| if (value >> (width - 1 - i)) & 1 == 1 { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join(" ")
}

fn bits_value(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

impl CodebookFile {
    pub fn per_user(config: SystemConfig, codebooks: Vec<Codebook>) -> Result<Self> {
        check_dim("codebook count", config.users(), codebooks.len())?;
        for cb in &codebooks {
            check_dim("codebook order", config.order(), cb.order())?;
            check_dim("codebook labels", config.order(), cb.labels.len())?;
            for cw in &cb.codewords {
                check_dim("codeword resources", config.resources(), cw.resources())?;
            }
            let mut seen = cb.labels.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != cb.labels.len() || seen.iter().any(|&l| l as usize >= config.order()) {
                return Err(Error::config(format!("user {} labels are not a permutation", cb.user)));
            }
        }
        Ok(Self {
            config,
            data: CodebookData::PerUser(codebooks),
        })
    }

    pub fn joint(config: SystemConfig, constellation: SuperposedConstellation) -> Result<Self> {
        check_dim("constellation users", config.users(), constellation.users())?;
        check_dim("constellation order", config.order(), constellation.order())?;
        check_dim("constellation resources", config.resources(), constellation.resources())?;
        Ok(Self {
            config,
            data: CodebookData::Joint(constellation),
        })
    }

    pub fn from_encoder(encoder: &MuEncoder) -> Result<Self> {
        let (codebooks, _) = extract_codebooks(encoder)?;
        Self::per_user(encoder.config().clone(), codebooks)
    }

    pub fn constellation(&self) -> Result<SuperposedConstellation> {
        match &self.data {
            CodebookData::PerUser(cbs) => SuperposedConstellation::from_codebooks(cbs),
            CodebookData::Joint(c) => Ok(c.clone()),
        }
    }

    pub fn codebooks(&self) -> Option<&[Codebook]> {
        match &self.data {
            CodebookData::PerUser(cbs) => Some(cbs),
            CodebookData::Joint(_) => None,
        }
    }

    pub fn to_text(&self, provenance: &str) -> String {
        let cfg = &self.config;
        let mut out = String::new();
        for line in provenance.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("format = {FORMAT_TAG}\n[system]\n"));
        out.push_str(&format!("users = {}\n", cfg.users()));
        out.push_str(&format!("resources = {}\n", cfg.resources()));
        out.push_str(&format!("per_user = {}\n", cfg.per_user()));
        out.push_str(&format!("order = {}\n", cfg.order()));
        out.push_str(&format!("power = {}\n", fmt_f64(cfg.power())));
        out.push_str(&format!("pnl_level = {}\n", cfg.pnl()));
        out.push_str("[mapping]\n");
        for (k, row) in cfg.mapping().rows().iter().enumerate() {
            let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("row {k} = {}\n", row.join(" ")));
        }
        let bps = cfg.bits_per_symbol();
        match &self.data {
            CodebookData::PerUser(cbs) => {
                for cb in cbs {
                    out.push_str(&format!("[user {}]\n", cb.user));
                    for (m, (cw, &label)) in cb.codewords.iter().zip(&cb.labels).enumerate() {
                        out.push_str(&format!("codeword {m} = {}\n", fmt_f64s(cw.as_slice())));
                        out.push_str(&format!("label {m} = {}\n", bits_string(label as u64, bps)));
                    }
                }
            }
            CodebookData::Joint(c) => {
                out.push_str("[joint]\n");
                out.push_str(&format!("energy = {}\n", fmt_f64(c.energy())));
                for i in 0..c.len() {
                    out.push_str(&format!("point {i} = {}\n", fmt_f64s(c.point(i))));
                    out.push_str(&format!("label {i} = {}\n", bits_string(c.label(i), c.bits_per_point())));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        match doc.header.iter().find(|e| e.key == "format") {
            Some(e) if e.value == FORMAT_TAG => {}
            Some(e) => {
                return Err(Error::parse(e.line, "format", format!("unsupported format `{}`", e.value)))
            }
            None => return Err(Error::parse(1, "format", "missing format line")),
        }
        let sys = doc.section("system")?;
        let users = sys.get("users")?.usize()?;
        let resources = sys.get("resources")?.usize()?;
        let order = sys.get("order")?.usize()?;
        let power = sys.get("power")?.f64()?;
        let level_entry = sys.get("pnl_level")?;
        let level = PnlLevel::try_from(level_entry.usize()? as u8)
            .map_err(|m| Error::parse(level_entry.line, "pnl_level", m))?;

        let map = doc.section("mapping")?;
        let rows = (0..resources)
            .map(|k| {
                map.get(&format!("row {k}"))?
                    .bits(users)
            })
            .collect::<Result<Vec<_>>>()?;
        let mapping = MappingMatrix::from_rows(&rows)?;
        let config = SystemConfig::new(order, mapping, level, power)
            .map_err(|e| Error::parse(sys.line, "system", e.to_string()))?;
        let per_user = sys.get("per_user")?;
        if per_user.usize()? != config.per_user() {
            return Err(Error::parse(
                per_user.line,
                "per_user",
                format!("mapping gives {} resources per user", config.per_user()),
            ));
        }

        let dim = 2 * resources;
        let bps = config.bits_per_symbol();
        if let Ok(joint) = doc.section("joint") {
            let energy = joint.get("energy")?.f64()?;
            let n = config.num_labels();
            let mut points = Vec::with_capacity(n * dim);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                points.extend(joint.get(&format!("point {i}"))?.f64s(dim)?);
                labels.push(bits_value(&joint.get(&format!("label {i}"))?.bits(config.total_bits())?));
            }
            let c = SuperposedConstellation::from_points(users, order, resources, points, labels, energy)
                .map_err(|e| Error::parse(joint.line, "joint", e.to_string()))?;
            return Self::joint(config, c);
        }

        let mut codebooks = Vec::with_capacity(users);
        for j in 0..users {
            let sec: &Section = doc.section(&format!("user {j}"))?;
            let mut codewords = Vec::with_capacity(order);
            let mut labels = Vec::with_capacity(order);
            for m in 0..order {
                codewords.push(Codeword::from_packed(sec.get(&format!("codeword {m}"))?.f64s(dim)?)?);
                labels.push(bits_value(&sec.get(&format!("label {m}"))?.bits(bps)?) as u32);
            }
            codebooks.push(Codebook {
                user: j,
                codewords,
                labels,
            });
        }
        Self::per_user(config, codebooks)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path, provenance: &str) -> Result<()> {
        fs::write(path, self.to_text(provenance)).map_err(|e| Error::io(path, e))
    }
}
