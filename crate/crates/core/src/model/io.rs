//! `.hipmdp` model files: UTF-8 JSON with every float written to 17
//! significant digits, so a save/load round trip is bit-exact.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{LatentDynamicsModel, ModelParts, StateLayout, WeightMeanPosterior};
use crate::error::{HipError, Result};
use crate::gp::{KernelParams, SupportSet};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "hipmdp";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(rename = "K")]
    num_features: usize,
    d: usize,
    num_actions: usize,
    num_support: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeanEntry {
    mean: f64,
    variance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    format_version: u32,
    header: Header,
    angular_dims: Vec<bool>,
    support_points: Vec<Vec<f64>>,
    /// row-major over action then dimension
    kernels: Vec<KernelParams>,
    /// row-major over feature, action, dimension
    z: Vec<u8>,
    /// same order as `z`
    f: Vec<Vec<f64>>,
    weight_means: Vec<MeanEntry>,
    sigma_w: f64,
    sigma_w0: f64,
}

/// Pretty JSON, but floats always in `{:.16e}` form.
struct FullPrecision<'a>(PrettyFormatter<'a>);

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn to_file(model: &LatentDynamicsModel) -> ModelFile {
    let p = model.parts();
    let s = &p.support;
    ModelFile {
        format: FORMAT_TAG.to_string(),
        format_version: MODEL_FORMAT_VERSION,
        header: Header {
            num_features: p.z.len(),
            d: s.dim,
            num_actions: s.num_actions,
            num_support: s.len(),
        },
        angular_dims: p.layout.angular.clone(),
        support_points: s.points.clone(),
        kernels: s.kernels.clone(),
        z: p.z.iter().flatten().map(|&on| on as u8).collect(),
        f: p
            .f
            .iter()
            .flatten()
            .map(|v| v.iter().copied().collect())
            .collect(),
        weight_means: p
            .weight_means
            .iter()
            .map(|m| MeanEntry {
                mean: m.mean,
                variance: m.variance,
            })
            .collect(),
        sigma_w: p.sigma_w,
        sigma_w0: p.sigma_w0,
    }
}

/// Serialized bytes of a model; exposed so callers can hash or diff them.
pub fn model_to_string(model: &LatentDynamicsModel) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(PrettyFormatter::new()));
    to_file(model)
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn save_model(model: &LatentDynamicsModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_string(model)).map_err(|e| HipError::io(path, e))
}

fn check_finite(field: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(HipError::format(field, "non-finite value"))
    }
}

pub fn model_from_str(text: &str) -> Result<LatentDynamicsModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        HipError::format(if path == "." { "<root>".to_string() } else { path }, format!("schema violation: {}", e.inner()))
    })?;
    if file.format != FORMAT_TAG {
        return Err(HipError::format("format", format!("expected `{FORMAT_TAG}`, found `{}`", file.format)));
    }
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(HipError::format(
            "format_version",
            format!("unsupported version {} (expected {MODEL_FORMAT_VERSION})", file.format_version),
        ));
    }
    let h = &file.header;
    let rows = h.num_actions * h.d;
    if file.angular_dims.len() != h.d {
        return Err(HipError::format("angular_dims", "length differs from header d"));
    }
    if file.support_points.len() != h.num_support {
        return Err(HipError::format("support_points", "count differs from header num_support"));
    }
    if file.kernels.len() != rows {
        return Err(HipError::format("kernels", "expected one entry per (action, dimension)"));
    }
    if file.z.len() != h.num_features * rows {
        return Err(HipError::format("z", "length differs from K * num_actions * d"));
    }
    if file.f.len() != h.num_features * rows {
        return Err(HipError::format("f", "length differs from K * num_actions * d"));
    }
    if file.z.iter().any(|&v| v > 1) {
        return Err(HipError::format("z", "entries must be 0 or 1"));
    }
    check_finite("support_points", file.support_points.iter().flatten().copied())?;
    for (i, k) in file.kernels.iter().enumerate() {
        let field = format!("kernels[{i}]");
        check_finite(&field, k.lengthscales.iter().copied().chain([k.signal_variance, k.noise_variance]))?;
        k.validate().map_err(|e| HipError::format(&field, e.to_string()))?;
    }
    check_finite("f", file.f.iter().flatten().copied())?;
    check_finite("weight_means", file.weight_means.iter().flat_map(|m| [m.mean, m.variance]))?;
    check_finite("sigma_w", [file.sigma_w])?;
    check_finite("sigma_w0", [file.sigma_w0])?;

    let support = SupportSet::new(file.support_points, file.kernels, h.num_actions, h.d)
        .map_err(|e| HipError::format("support_points", e.to_string()))?;
    let z = file
        .z
        .chunks(rows.max(1))
        .map(|c| c.iter().map(|&v| v == 1).collect())
        .collect();
    let mut f_iter = file.f.into_iter();
    let f = (0..h.num_features)
        .map(|_| {
            (0..rows)
                .map(|_| DVector::from_vec(f_iter.next().expect("length checked")))
                .collect()
        })
        .collect();
    let parts = ModelParts {
        layout: StateLayout {
            angular: file.angular_dims,
        },
        support,
        z,
        f,
        weight_means: file
            .weight_means
            .into_iter()
            .map(|m| WeightMeanPosterior {
                mean: m.mean,
                variance: m.variance,
            })
            .collect(),
        sigma_w: file.sigma_w,
        sigma_w0: file.sigma_w0,
    };
    LatentDynamicsModel::new(parts)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LatentDynamicsModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HipError::io(path, e))?;
    model_from_str(&text)
}
