//! On-disk formats: datasets, checkpoints, complex arrays, scenes, tables.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use risbeam_core::dataset::{Dataset, DatasetMeta, Sample};
use risbeam_core::metrics::EvalReport;
use risbeam_core::scene::Scene;
use risbeam_core::setnet::{LearningCurves, NetShape, SetNetwork, Variant};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DATASET_MAGIC: &str = "risbeam-dataset";
pub const MODEL_MAGIC: &str = "risbeam-model";
pub const FORMAT_VERSION: u32 = 1;
pub const COMPLEX_MAGIC: &[u8; 8] = b"RBCPLX01";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses `magic version key=value ...` and checks magic and version.
fn parse_header<'a>(path: &Path, line: &'a str, magic: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some(magic) {
        return Err(Error::format(path, 1, format!("not a {magic} file")));
    }
    match tokens.next().map(str::parse::<u32>) {
        Some(Ok(FORMAT_VERSION)) => {}
        Some(Ok(v)) => return Err(Error::format(path, 1, format!("unsupported version {v}"))),
        _ => return Err(Error::format(path, 1, "missing version")),
    }
    tokens
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| Error::format(path, 1, format!("malformed header field `{t}`")))
        })
        .collect()
}

struct Fields<'a> {
    path: &'a Path,
    pairs: Vec<(&'a str, &'a str)>,
}

impl Fields<'_> {
    fn raw(&self, key: &str) -> Result<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::format(self.path, 1, format!("header lacks `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::format(self.path, 1, format!("bad value `{raw}` for `{key}`")))
    }

    fn only(&self, keys: &[&str]) -> Result<()> {
        for (k, _) in &self.pairs {
            if !keys.contains(k) {
                return Err(Error::format(self.path, 1, format!("unknown header field `{k}`")));
            }
        }
        Ok(())
    }
}

const DATASET_KEYS: [&str; 9] = [
    "num_classes",
    "u_max",
    "q_size",
    "image_width",
    "image_height",
    "camera_id",
    "split_seed",
    "count",
    "config_hash",
];

/// Header line, then one line per sample:
/// `scene_id camera_id v_0 .. v_{n-1} bits`.
pub fn encode_dataset(ds: &Dataset) -> String {
    let m = &ds.meta;
    let hash = if m.config_hash.is_empty() { "-" } else { &m.config_hash };
    let mut out = format!(
        "{DATASET_MAGIC} {FORMAT_VERSION} num_classes={} u_max={} q_size={} image_width={} image_height={} camera_id={} split_seed={} count={} config_hash={hash}\n",
        m.num_classes, m.u_max, m.q_size, m.image_width, m.image_height, m.camera_id, m.split_seed, m.count
    );
    for s in &ds.samples {
        write!(out, "{} {}", s.scene_id, s.camera_id).unwrap();
        for x in &s.v {
            write!(out, " {x:?}").unwrap();
        }
        out.push(' ');
        out.extend(s.t_star.iter().map(|&b| if b == 0 { '0' } else { '1' }));
        out.push('\n');
    }
    out
}

pub fn decode_dataset(path: &Path, text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let fields = Fields {
        path,
        pairs: parse_header(path, header, DATASET_MAGIC)?,
    };
    fields.only(&DATASET_KEYS)?;
    let hash: String = fields.get("config_hash")?;
    let meta = DatasetMeta {
        num_classes: fields.get("num_classes")?,
        u_max: fields.get("u_max")?,
        q_size: fields.get("q_size")?,
        image_width: fields.get("image_width")?,
        image_height: fields.get("image_height")?,
        camera_id: fields.get("camera_id")?,
        split_seed: fields.get("split_seed")?,
        count: fields.get("count")?,
        config_hash: if hash == "-" { String::new() } else { hash },
    };
    let n_v = meta.rows() * meta.u_max;
    let mut samples = Vec::with_capacity(meta.count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
        if tokens.len() != n_v + 3 {
            return Err(Error::format(
                path,
                lineno,
                format!("expected {} fields, found {}", n_v + 3, tokens.len()),
            ));
        }
        let bad = |what: &str, tok: &str| Error::format(path, lineno, format!("bad {what} `{tok}`"));
        let scene_id = tokens[0].parse().map_err(|_| bad("scene id", tokens[0]))?;
        let camera_id = tokens[1].parse().map_err(|_| bad("camera id", tokens[1]))?;
        let v = tokens[2..2 + n_v]
            .iter()
            .map(|t| match t.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad("value", t)),
            })
            .collect::<Result<Vec<f64>>>()?;
        let bits = tokens[n_v + 2];
        if bits.len() != meta.q_size {
            return Err(Error::format(
                path,
                lineno,
                format!("label has {} bits, expected {}", bits.len(), meta.q_size),
            ));
        }
        let t_star = bits
            .bytes()
            .map(|b| match b {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(bad("label", bits)),
            })
            .collect::<Result<Vec<u8>>>()?;
        samples.push(Sample {
            scene_id,
            camera_id,
            v,
            t_star,
        });
    }
    if samples.len() != meta.count {
        return Err(Error::format(
            path,
            samples.len() + 1,
            format!("truncated: header declares {} samples, found {}", meta.count, samples.len()),
        ));
    }
    let ds = Dataset { meta, samples };
    ds.validate()?;
    Ok(ds)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_file(path, encode_dataset(ds).as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::format(path, 1, "not UTF-8"))?;
    decode_dataset(path, &text)
}

/// Text header line, then the parameters as little-endian `f64`.
pub fn encode_model(net: &SetNetwork) -> Vec<u8> {
    let s = net.shape();
    let widths: Vec<String> = net.stack_widths().iter().map(usize::to_string).collect();
    let mut out = format!(
        "{MODEL_MAGIC} {FORMAT_VERSION} variant={} rows={} u_max={} q_size={} widths={} params={}\n",
        net.variant(),
        s.rows,
        s.u_max,
        s.q_size,
        widths.join(","),
        net.num_params()
    )
    .into_bytes();
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> Result<SetNetwork> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format(path, 1, "header is not UTF-8"))?;
    let fields = Fields {
        path,
        pairs: parse_header(path, header, MODEL_MAGIC)?,
    };
    fields.only(&["variant", "rows", "u_max", "q_size", "widths", "params"])?;
    let variant: Variant = fields
        .raw("variant")?
        .parse()
        .map_err(|e: risbeam_core::Error| Error::format(path, 1, e.to_string()))?;
    let shape = NetShape {
        rows: fields.get("rows")?,
        u_max: fields.get("u_max")?,
        q_size: fields.get("q_size")?,
    };
    let widths = fields
        .raw("widths")?
        .split(',')
        .map(|w| w.parse::<usize>())
        .collect::<Result<Vec<usize>, _>>()
        .map_err(|_| Error::format(path, 1, "bad widths"))?;
    if widths.len() < 2 {
        return Err(Error::format(path, 1, "widths need input and output"));
    }
    let count: usize = fields.get("params")?;
    let body = &bytes[end + 1..];
    if body.len() != count * 8 {
        return Err(Error::format(
            path,
            2,
            format!("expected {} parameter bytes, found {}", count * 8, body.len()),
        ));
    }
    let params: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let net = SetNetwork::from_parts(variant, shape, &widths[1..widths.len() - 1], params)?;
    if net.stack_widths() != widths {
        return Err(Error::format(path, 1, "widths do not match the variant and shape"));
    }
    Ok(net)
}

pub fn save_model(path: &Path, net: &SetNetwork) -> Result<()> {
    write_file(path, &encode_model(net))
}

pub fn load_model(path: &Path) -> Result<SetNetwork> {
    decode_model(path, &read_file(path)?)
}

/// A dense complex array of shape `dims`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexArray {
    pub dims: [u64; 3],
    pub data: Vec<Complex64>,
}

/// Magic, three little-endian `u64` dimensions, then interleaved `(re, im)`.
pub fn encode_complex(a: &ComplexArray) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 16 * a.data.len());
    out.extend_from_slice(COMPLEX_MAGIC);
    for d in a.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for z in &a.data {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_complex(path: &Path, bytes: &[u8]) -> Result<ComplexArray> {
    if bytes.len() < 32 || &bytes[..8] != COMPLEX_MAGIC {
        return Err(Error::format(path, 0, "not a complex array file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let dims = [word(8), word(16), word(24)];
    let n = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::format(path, 0, "dimensions overflow"))?;
    let body = &bytes[32..];
    if Some(body.len()) != n.checked_mul(16) {
        return Err(Error::format(
            path,
            0,
            format!("{dims:?} needs {} data bytes, found {}", n.saturating_mul(16), body.len()),
        ));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let data = body
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    Ok(ComplexArray { dims, data })
}

pub fn write_complex(path: &Path, a: &ComplexArray) -> Result<()> {
    write_file(path, &encode_complex(a))
}

pub fn read_complex(path: &Path) -> Result<ComplexArray> {
    decode_complex(path, &read_file(path)?)
}

/// One scene per line, as JSON.
pub fn write_scenes(path: &Path, scenes: &[Scene]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for s in scenes {
        let line = serde_json::to_string(s).expect("scene serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scenes(path: &Path) -> Result<Vec<Scene>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scenes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let scene = serde_json::from_str(&line).map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        scenes.push(scene);
    }
    Ok(scenes)
}

/// Per-camera entry of the generation manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub camera_id: usize,
    pub dataset: String,
    pub samples: usize,
    /// Images whose optimal beam set is empty; they are left out of the dataset.
    pub empty_beam_sets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    pub config_hash: String,
    pub scenes: u64,
    pub ues: usize,
    pub scene_ids: Vec<u64>,
    pub cameras: Vec<CameraEntry>,
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.line(), e.to_string()))
}

pub fn curves_csv(curves: &LearningCurves) -> String {
    let mut out = String::from("epoch,train_loss,test_loss\n");
    for r in &curves.epochs {
        writeln!(out, "{},{:?},{:?}", r.epoch, r.train_loss, r.test_loss).unwrap();
    }
    out
}

pub fn sweep_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("k,ratio\n");
    for (k, r) in curve {
        writeln!(out, "{k},{r:?}").unwrap();
    }
    out
}

pub fn eval_csv(label: &str, camera_id: usize, report: &EvalReport) -> String {
    format!(
        "model,camera_id,n_test,n_recall,accuracy,recall\n{label},{camera_id},{},{},{:?},{:?}\n",
        report.n_test, report.n_recall, report.accuracy, report.recall
    )
}

/// Per-sample optimal and predicted sets; beams separated by spaces.
pub fn eval_samples_csv(report: &EvalReport) -> String {
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut out = String::from("scene_id,q_star,q_hat\n");
    for r in &report.records {
        writeln!(out, "{},{},{}", r.scene_id, join(&r.q_star), join(&r.q_hat)).unwrap();
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn meta(count: usize) -> DatasetMeta {
        DatasetMeta {
            num_classes: 2,
            u_max: 2,
            q_size: 5,
            image_width: 800,
            image_height: 600,
            camera_id: 0,
            split_seed: 3,
            count,
            config_hash: "abc".into(),
        }
    }

    fn dataset() -> Dataset {
        let samples = vec![
            Sample {
                scene_id: 4,
                camera_id: 0,
                v: vec![1.0, 0.0, 0.1, 1.0 / 3.0, 2e-17, 0.999_999_999_999, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                t_star: vec![0, 1, 0, 0, 1],
            },
            Sample {
                scene_id: 9,
                camera_id: 0,
                v: vec![0.0; 12],
                t_star: vec![1, 0, 0, 0, 0],
            },
        ];
        Dataset {
            meta: meta(2),
            samples,
        }
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let ds = dataset();
        let text = encode_dataset(&ds);
        let back = decode_dataset(Path::new("x"), &text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back), text);
    }

    #[test]
    fn dataset_errors_are_explicit() {
        let text = encode_dataset(&dataset());
        let p = Path::new("d.txt");
        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        let err = decode_dataset(p, &truncated).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        let bad = text.replacen("risbeam-dataset 1", "risbeam-dataset 9", 1);
        assert!(decode_dataset(p, &bad).unwrap_err().to_string().contains("version"));
        let bad = text.replacen("u_max=2", "u_max=3", 1);
        assert!(decode_dataset(p, &bad).is_err());
        let bad = text.replacen("01001", "01002", 1);
        assert!(decode_dataset(p, &bad).is_err());
        assert!(decode_dataset(p, "").is_err());
        let bad = text.replacen("count=2", "count=2 colour=red", 1);
        assert!(decode_dataset(p, &bad).unwrap_err().to_string().contains("colour"));
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let shape = NetShape {
            rows: 6,
            u_max: 3,
            q_size: 4,
        };
        for variant in Variant::ALL {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
            let net = SetNetwork::new(variant, shape, &[5, 3], &mut rng).unwrap();
            let bytes = encode_model(&net);
            let back = decode_model(Path::new("m"), &bytes).unwrap();
            assert_eq!(back, net);
            assert_eq!(encode_model(&back), bytes);
            assert!(decode_model(Path::new("m"), &bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn complex_round_trip() {
        let a = ComplexArray {
            dims: [2, 1, 3],
            data: (0..6).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect(),
        };
        let bytes = encode_complex(&a);
        assert_eq!(bytes.len(), 32 + 6 * 16);
        assert_eq!(decode_complex(Path::new("c"), &bytes).unwrap(), a);
        assert!(decode_complex(Path::new("c"), &bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn tables_have_headers() {
        assert_eq!(sweep_csv(&[(1, 0.5), (64, 1.0)]), "k,ratio\n1,0.5\n64,1.0\n");
    }
}
