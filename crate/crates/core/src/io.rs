//! Record and result file formats.
//!
//! Records are JSON Lines, one `MeasurementRecord` per line with a fixed key
//! order, bitstring keys (leftmost character = qubit 1, `1` = excited) and
//! floats written with 17 significant digits so that write → read → write is
//! byte-identical. Results are tab-separated with a `#` comment block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{EntropyEstimate, PurityEstimate};
use crate::linalg::{Mat2, C64};
use crate::qstate::{format_bitstring, parse_bitstring, SubsystemMask};
use crate::sampler::{MeasurementRecord, SCHEMA_VERSION};

/// 17-significant-digit scientific notation; parses back to the same bits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_record(r: &MeasurementRecord) -> String {
    let mut s = String::with_capacity(128 + 64 * r.n_qubits + 16 * r.counts.len());
    write!(
        s,
        "{{\"schema_version\":{},\"n_qubits\":{},\"unitary_index\":{},\"time_s\":{},\"pattern\":{},\"n_shots\":{},\"angles\":[",
        r.schema_version,
        r.n_qubits,
        r.unitary_index,
        format_f64(r.time_s),
        r.pattern,
        r.n_shots
    )
    .expect("write to string");
    for (i, a) in r.angles.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "[{},{},{}]", format_f64(a[0]), format_f64(a[1]), format_f64(a[2])).expect("write to string");
    }
    s.push_str("],\"counts\":{");
    for (i, (&k, &c)) in r.counts.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "\"{}\":{c}", format_bitstring(k, r.n_qubits)).expect("write to string");
    }
    s.push('}');
    if let Some(ms) = &r.matrices {
        s.push_str(",\"matrices\":[");
        for (i, m) in ms.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('[');
            for (k, z) in m.0.iter().flatten().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                write!(s, "[{},{}]", format_f64(z.re), format_f64(z.im)).expect("write to string");
            }
            s.push(']');
        }
        s.push(']');
    }
    s.push('}');
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    schema_version: u32,
    n_qubits: usize,
    unitary_index: u64,
    time_s: f64,
    pattern: u64,
    n_shots: u64,
    angles: Vec<[f64; 3]>,
    counts: BTreeMap<String, u64>,
    #[serde(default)]
    matrices: Option<Vec<[[f64; 2]; 4]>>,
}

/// Parse one record line; `line` is 1-based and used in error messages.
pub fn parse_record(text: &str, line: usize) -> Result<MeasurementRecord> {
    let perr = |msg: String| Error::Parse { line, msg };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| perr(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| perr("missing or invalid schema_version".into()))?;
    if version > SCHEMA_VERSION as u64 {
        return Err(Error::UnsupportedSchema { found: version.min(u32::MAX as u64) as u32, supported: SCHEMA_VERSION });
    }
    let raw: RawRecord = serde_json::from_value(value).map_err(|e| perr(e.to_string()))?;
    let mut counts = BTreeMap::new();
    for (bits, c) in raw.counts {
        if bits.len() != raw.n_qubits {
            return Err(perr(format!("bitstring `{bits}` has length {}, expected {}", bits.len(), raw.n_qubits)));
        }
        let idx = parse_bitstring(&bits).map_err(|e| perr(e.to_string()))?;
        if c > 0 {
            counts.insert(idx, c);
        }
    }
    let matrices = raw.matrices.map(|ms| {
        ms.iter()
            .map(|m| {
                let z = |k: usize| C64::new(m[k][0], m[k][1]);
                Mat2([[z(0), z(1)], [z(2), z(3)]])
            })
            .collect()
    });
    let rec = MeasurementRecord {
        schema_version: raw.schema_version,
        n_qubits: raw.n_qubits,
        unitary_index: raw.unitary_index,
        time_s: raw.time_s,
        pattern: raw.pattern,
        n_shots: raw.n_shots,
        angles: raw.angles,
        counts,
        matrices,
    };
    rec.validate().map_err(|e| match e {
        Error::UnsupportedSchema { .. } => e,
        other => perr(other.to_string()),
    })?;
    Ok(rec)
}

pub fn read_records(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        writeln!(w, "{}", format_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub time_s: f64,
    /// Pattern id, or `pooled` for disorder averages.
    pub pattern: String,
    pub mask: SubsystemMask,
    pub purity: f64,
    pub stderr: f64,
    pub s2: Option<f64>,
    pub stderr_s2: Option<f64>,
    pub flag: &'static str,
}

impl ResultRow {
    pub fn new(experiment: &str, time_s: f64, pattern: String, p: &PurityEstimate, e: &EntropyEstimate) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            time_s,
            pattern,
            mask: p.mask,
            purity: p.purity,
            stderr: p.stderr,
            s2: e.s2,
            stderr_s2: e.stderr_s2,
            flag: e.flag.as_str(),
        }
    }
}

pub const RESULT_HEADER: &str = "experiment\ttime_s\tpattern\tmask\tn_a\tpurity\tstderr\ts2\tstderr_s2\tflag";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn format_result_row(r: &ResultRow) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.experiment,
        r.time_s,
        r.pattern,
        r.mask,
        r.mask.len(),
        r.purity,
        r.stderr,
        opt(r.s2),
        opt(r.stderr_s2),
        r.flag
    )
}

/// `# key: value` lines, in the given order.
pub fn comment_block(entries: &[(&str, String)]) -> String {
    entries.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
}

/// Write a table with a provenance comment block, header row and rows.
pub fn write_table(path: &Path, provenance: &[(&str, String)], header: &str, rows: &[String]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(comment_block(provenance).as_bytes())?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a results table written by [`write_table`] with [`RESULT_HEADER`].
pub fn read_result_rows(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<&str> = header.split('\t').collect();
    lines
        .map(|(i, l)| {
            let vals: Vec<&str> = l.split('\t').collect();
            if vals.len() != cols.len() {
                return Err(Error::Parse { line: i + 1, msg: format!("{} columns, expected {}", vals.len(), cols.len()) });
            }
            Ok(cols.iter().zip(vals).map(|(c, v)| (c.to_string(), v.to_string())).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randunitary::{LocalUnitarySet, SeedStream};
    use crate::sampler::{sample_record, NoiseModel};
    use crate::qstate::QuantumState;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(n: usize, seed: u64) -> MeasurementRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = QuantumState::haar_random(n, &mut rng).unwrap();
        let set = LocalUnitarySet::sample(&SeedStream::new(seed), seed, n);
        let mut r = sample_record(&psi, &set, 150, &NoiseModel::noiseless(n), &mut rng).unwrap();
        r.time_s = 1e-3 * (seed % 7) as f64;
        r.pattern = seed % 3;
        r
    }

    #[test]
    fn two_qubit_line_layout() {
        let mut r = sample(2, 1);
        r.counts = [(0b01, 100), (0b10, 50)].into_iter().collect();
        let line = format_record(&r);
        assert!(line.starts_with("{\"schema_version\":1,\"n_qubits\":2,"));
        assert!(line.contains("\"counts\":{\"01\":100,\"10\":50}"));
        assert!(!line.contains('\n'));
    }

    #[test]
    fn rejects_malformed_lines() {
        let good = format_record(&sample(3, 2));
        assert!(parse_record(&good, 1).is_ok());
        let cases = [
            good.replace("\"n_shots\":150", "\"n_shots\":151"),
            good.replace("\"pattern\"", "\"patern\""),
            good.replacen("\"counts\":{\"", "\"counts\":{\"0", 1),
            good.replace("\"n_qubits\":3", "\"n_qubits\":3,\"extra\":1"),
            good[..good.len() - 1].to_string(),
        ];
        for c in &cases {
            assert!(matches!(parse_record(c, 7), Err(Error::Parse { line: 7, .. })), "{c}");
        }
        let newer = good.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(parse_record(&newer, 1), Err(Error::UnsupportedSchema { found: 2, .. })));
    }

    #[test]
    fn matrices_round_trip() {
        let mut r = sample(2, 3);
        r.matrices = Some(r.unitaries());
        let line = format_record(&r);
        let back = parse_record(&line, 1).unwrap();
        assert_eq!(back, r);
        assert_eq!(format_record(&back), line);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, -0.0, 1e-3, std::f64::consts::PI, -2.5e-300, 6.283185307179586] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn write_read_write_is_identical(n in 1usize..=8, seed in any::<u64>()) {
            let r = sample(n, seed);
            let line = format_record(&r);
            let back = parse_record(&line, 1).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(format_record(&back), line);
        }
    }
}
