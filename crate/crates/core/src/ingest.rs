//! Readers and writers for run-record files and profiler metric dumps.
//!
//! Run files hold one JSON object per line with exactly the [`RunRecord`]
//! field names. Lines starting with `#` are comments; a
//! `# format_version: 1` comment pins the format version. Blank lines are
//! skipped. Profile dumps are CSV with the fixed header [`PROFILE_HEADER`].

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{PrecisionMode, ProfileVector, RunRecord};

pub const RUN_FORMAT_VERSION: u32 = 1;

pub const PROFILE_HEADER: [&str; 9] = [
    "workload_id",
    "achieved_occupancy",
    "ipc_efficiency",
    "gld_efficiency",
    "gst_efficiency",
    "dram_utilization",
    "parameter_count",
    "epochs_to_quality",
    "flops_per_forward",
];

const RUN_FIELDS: [&str; 11] = [
    "run_id",
    "benchmark_id",
    "system_name",
    "accelerator_count",
    "precision_mode",
    "comm_compression",
    "sustained_flops",
    "achieved_quality",
    "epochs_run",
    "wall_clock_seconds",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub path: Option<PathBuf>,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDump {
    pub path: Option<PathBuf>,
    pub vectors: Vec<ProfileVector>,
}

/// Streams run records out of a reader, one line at a time.
///
/// Yields `(line_number, record)` pairs with 1-based line numbers. Does not
/// check run_id uniqueness; [`parse_runs`] does.
pub struct RunReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> RunReader<R> {
    pub fn new(reader: R) -> Self {
        RunReader {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for RunReader<R> {
    type Item = Result<(usize, RunRecord)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Err(e) = check_version_comment(comment) {
                    return Some(Err(e));
                }
                continue;
            }
            return Some(parse_run_line(trimmed, self.line_no).map(|r| (self.line_no, r)));
        }
    }
}

fn check_version_comment(comment: &str) -> Result<()> {
    let comment = comment.trim();
    let Some(rest) = comment.strip_prefix("format_version") else {
        return Ok(());
    };
    let value = rest.trim_start_matches([':', '=', ' ', '\t']).trim();
    if value.parse::<u32>() == Ok(RUN_FORMAT_VERSION) {
        Ok(())
    } else {
        Err(Error::UnsupportedFormat {
            found: value.to_string(),
            supported: RUN_FORMAT_VERSION,
        })
    }
}

fn parse_run_line(line: &str, line_no: usize) -> Result<RunRecord> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Error::parse(line_no, format!("invalid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(Error::parse(line_no, "expected a JSON object"));
    };
    if let Some(unknown) = obj.keys().find(|k| !RUN_FIELDS.contains(&k.as_str())) {
        return Err(Error::parse(line_no, format!("unknown field {unknown}")));
    }
    let mut fields = Fields {
        obj: &mut obj,
        line: line_no,
    };
    Ok(RunRecord {
        run_id: fields.string("run_id")?,
        benchmark_id: fields.string("benchmark_id")?,
        system_name: fields.string("system_name")?,
        accelerator_count: fields.u32("accelerator_count")?,
        precision_mode: fields.precision("precision_mode")?,
        comm_compression: fields.bool("comm_compression")?,
        sustained_flops: fields.f64("sustained_flops")?,
        achieved_quality: fields.f64("achieved_quality")?,
        epochs_run: fields.u32("epochs_run")?,
        wall_clock_seconds: fields.f64("wall_clock_seconds")?,
        seed: fields.optional_i64("seed")?,
    })
}

struct Fields<'a> {
    obj: &'a mut Map<String, Value>,
    line: usize,
}

impl Fields<'_> {
    fn take(&mut self, name: &str) -> Result<Value> {
        self.obj
            .remove(name)
            .ok_or_else(|| Error::parse(self.line, format!("missing field {name}")))
    }

    fn bad(&self, name: &str, expected: &str, got: &Value) -> Error {
        Error::parse(
            self.line,
            format!("field {name}: expected {expected}, found {got}"),
        )
    }

    fn string(&mut self, name: &str) -> Result<String> {
        match self.take(name)? {
            Value::String(s) => Ok(s),
            other => Err(self.bad(name, "a string", &other)),
        }
    }

    fn bool(&mut self, name: &str) -> Result<bool> {
        match self.take(name)? {
            Value::Bool(b) => Ok(b),
            other => Err(self.bad(name, "a boolean", &other)),
        }
    }

    fn u32(&mut self, name: &str) -> Result<u32> {
        let v = self.take(name)?;
        v.as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| self.bad(name, "a non-negative 32-bit integer", &v))
    }

    fn f64(&mut self, name: &str) -> Result<f64> {
        let v = self.take(name)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(self.bad(name, "a finite number", &v)),
        }
    }

    fn optional_i64(&mut self, name: &str) -> Result<Option<i64>> {
        match self.obj.remove(name) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_i64()
                .map(Some)
                .ok_or_else(|| self.bad(name, "an integer or null", &v)),
        }
    }

    fn precision(&mut self, name: &str) -> Result<PrecisionMode> {
        let s = self.string(name)?;
        s.parse()
            .map_err(|e: String| Error::parse(self.line, format!("field {name}: {e}")))
    }
}

/// Parses a whole run file and checks run_id uniqueness.
pub fn parse_runs<R: BufRead>(reader: R) -> Result<RunFile> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::new();
    for item in RunReader::new(reader) {
        let (line, record) = item?;
        if let Some(&first_line) = seen.get(&record.run_id) {
            return Err(Error::DuplicateId {
                what: "run_id",
                id: record.run_id,
                first_line,
                second_line: line,
            });
        }
        seen.insert(record.run_id.clone(), line);
        records.push(record);
    }
    Ok(RunFile {
        path: None,
        records,
    })
}

pub fn read_runs_file(path: impl AsRef<Path>) -> Result<RunFile> {
    let path = path.as_ref();
    let mut file = parse_runs(BufReader::new(File::open(path)?))?;
    file.path = Some(path.to_path_buf());
    Ok(file)
}

/// Serializes records one per line, numbers in shortest round-trip form.
pub fn write_runs<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn runs_to_string(records: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    write_runs(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses a profiler metric dump.
///
/// Ratio columns accept fractions (`0.875`) or percentages (`87.5%`).
/// `dram_utilization` is the profiler's 0-10 level and is stored divided by
/// ten. Empty cells become `None`.
pub fn parse_profiles<R: Read>(reader: R) -> Result<ProfileDump> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().ne(PROFILE_HEADER.iter().copied()) {
        return Err(Error::HeaderMismatch {
            expected: PROFILE_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut vectors = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let cell = |i: usize| row.get(i).unwrap_or("").trim();

        let workload_id = cell(0).to_string();
        if workload_id.is_empty() {
            return Err(Error::parse(line, "empty workload_id"));
        }
        if let Some(&first_line) = seen.get(&workload_id) {
            return Err(Error::DuplicateId {
                what: "workload_id",
                id: workload_id,
                first_line,
                second_line: line,
            });
        }
        seen.insert(workload_id.clone(), line);

        let ratio = |i: usize| parse_ratio(cell(i), PROFILE_HEADER[i], line);
        vectors.push(ProfileVector {
            achieved_occupancy: ratio(1)?,
            ipc_efficiency: ratio(2)?,
            gld_efficiency: ratio(3)?,
            gst_efficiency: ratio(4)?,
            dram_utilization: parse_dram_level(cell(5), line)?,
            parameter_count: parse_count(cell(6), PROFILE_HEADER[6], line)?,
            epochs_to_quality: parse_positive(cell(7), PROFILE_HEADER[7], line)?,
            flops_per_forward: parse_positive(cell(8), PROFILE_HEADER[8], line)?,
            workload_id,
        });
    }
    Ok(ProfileDump {
        path: None,
        vectors,
    })
}

pub fn read_profiles_file(path: impl AsRef<Path>) -> Result<ProfileDump> {
    let path = path.as_ref();
    let mut dump = parse_profiles(BufReader::new(File::open(path)?))?;
    dump.path = Some(path.to_path_buf());
    Ok(dump)
}

fn parse_number(text: &str, column: &str, line: usize) -> Result<f64> {
    // f64::from_str also accepts "inf" and "NaN"; neither is a measurement.
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::parse(
            line,
            format!("{column}: non-numeric value `{text}`"),
        )),
    }
}

fn parse_ratio(text: &str, column: &str, line: usize) -> Result<Option<f64>> {
    if text.is_empty() {
        return Ok(None);
    }
    let value = match text.strip_suffix('%') {
        Some(pct) => parse_number(pct.trim_end(), column, line)? / 100.0,
        None => parse_number(text, column, line)?,
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::parse(
            line,
            format!("{column}: value `{text}` outside [0, 1]"),
        ));
    }
    Ok(Some(value))
}

fn parse_dram_level(text: &str, line: usize) -> Result<Option<f64>> {
    if text.is_empty() {
        return Ok(None);
    }
    let level = parse_number(text, "dram_utilization", line)?;
    if !(0.0..=10.0).contains(&level) {
        return Err(Error::parse(
            line,
            format!("dram_utilization: level `{text}` outside [0, 10]"),
        ));
    }
    Ok(Some(level / 10.0))
}

fn parse_count(text: &str, column: &str, line: usize) -> Result<Option<u64>> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse::<u64>().map(Some).map_err(|_| {
        Error::parse(
            line,
            format!("{column}: expected a non-negative integer, found `{text}`"),
        )
    })
}

fn parse_positive(text: &str, column: &str, line: usize) -> Result<Option<f64>> {
    if text.is_empty() {
        return Ok(None);
    }
    let value = parse_number(text, column, line)?;
    if value <= 0.0 {
        return Err(Error::parse(
            line,
            format!("{column}: value `{text}` must be > 0"),
        ));
    }
    Ok(Some(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LINE: &str = r#"{"run_id":"r1","benchmark_id":"image_classification","system_name":"sys","accelerator_count":8,"precision_mode":"fp32","comm_compression":false,"sustained_flops":1.0e14,"achieved_quality":0.763,"epochs_run":90,"wall_clock_seconds":7200.0}"#;

    fn parse_str(s: &str) -> Result<RunFile> {
        parse_runs(s.as_bytes())
    }

    #[test]
    fn one_line_one_record() {
        let file = parse_str(LINE).unwrap();
        assert_eq!(file.records.len(), 1);
        let r = &file.records[0];
        assert_eq!(r.run_id, "r1");
        assert_eq!(r.sustained_flops, 1.0e14);
        assert_eq!(r.precision_mode, PrecisionMode::Fp32);
        assert_eq!(r.seed, None);
    }

    #[test]
    fn missing_field_reports_line_and_name() {
        let line = LINE.replace(r#""sustained_flops":1.0e14,"#, "");
        let err = parse_str(&line).unwrap_err();
        assert_eq!(err.to_string(), "line 1: missing field sustained_flops");
    }

    #[test]
    fn duplicate_run_id_names_both_lines() {
        let text = format!("{LINE}\n{LINE}\n");
        match parse_str(&text).unwrap_err() {
            Error::DuplicateId {
                id,
                first_line,
                second_line,
                ..
            } => {
                assert_eq!(id, "r1");
                assert_eq!((first_line, second_line), (1, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let line = LINE.replace("achieved_quality", "achived_quality");
        let msg = parse_str(&line).unwrap_err().to_string();
        assert!(msg.contains("unknown field achived_quality"), "{msg}");
    }

    #[test]
    fn comments_blanks_and_version_header() {
        let text = format!("# format_version: 1\n\n# produced by hand\n{LINE}\n");
        assert_eq!(parse_str(&text).unwrap().records.len(), 1);
        let err = parse_str(&format!("# format_version: 2\n{LINE}")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat { .. }));
    }

    #[test]
    fn line_numbers_count_comments() {
        let text = format!("# c\n{LINE}\n{{\"run_id\":3}}\n");
        let msg = parse_str(&text).unwrap_err().to_string();
        assert!(msg.starts_with("line 3:"), "{msg}");
    }

    #[test]
    fn wrong_types_and_out_of_range_numbers() {
        let quoted = LINE.replace("\"epochs_run\":90", "\"epochs_run\":\"90\"");
        assert!(parse_str(&quoted)
            .unwrap_err()
            .to_string()
            .contains("epochs_run"));
        let huge = LINE.replace("1.0e14", "1e400");
        assert!(parse_str(&huge).is_err());
        let neg = LINE.replace("\"accelerator_count\":8", "\"accelerator_count\":-8");
        assert!(parse_str(&neg)
            .unwrap_err()
            .to_string()
            .contains("accelerator_count"));
        let prec = LINE.replace("fp32", "bf16");
        assert!(parse_str(&prec).unwrap_err().to_string().contains("bf16"));
    }

    #[test]
    fn empty_write_is_empty_stream() {
        assert_eq!(runs_to_string(&[]), "");
        assert!(parse_str("").unwrap().records.is_empty());
    }

    #[test]
    fn single_record_is_single_line() {
        let records = parse_str(LINE).unwrap().records;
        let text = runs_to_string(&records);
        assert_eq!(text.lines().count(), 1);
        assert!(text.ends_with('\n'));
    }

    fn arb_record() -> impl Strategy<Value = RunRecord> {
        (
            "[a-z0-9_-]{1,12}",
            prop_oneof![
                Just("ewa".to_string()),
                Just("image_classification".to_string())
            ],
            "[ -~]{0,20}",
            1u32..4096,
            any::<bool>(),
            any::<bool>(),
            (1e-300f64..1e300, 0.0f64..=1.0, 1u32..500, 1e-3f64..1e9),
            proptest::option::of(any::<i64>()),
        )
            .prop_map(
                |(run_id, benchmark_id, system_name, p, mixed, comp, (f, q, e, w), seed)| {
                    RunRecord {
                        run_id,
                        benchmark_id,
                        system_name,
                        accelerator_count: p,
                        precision_mode: if mixed {
                            PrecisionMode::Mixed
                        } else {
                            PrecisionMode::Fp32
                        },
                        comm_compression: comp,
                        sustained_flops: f,
                        achieved_quality: q,
                        epochs_run: e,
                        wall_clock_seconds: w,
                        seed,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(records in proptest::collection::vec(arb_record(), 0..100)) {
            let mut records = records;
            for (i, r) in records.iter_mut().enumerate() {
                r.run_id = format!("{}-{i}", r.run_id);
            }
            let parsed = parse_str(&runs_to_string(&records)).unwrap().records;
            prop_assert_eq!(parsed, records);
        }
    }

    const HEADER: &str = "workload_id,achieved_occupancy,ipc_efficiency,gld_efficiency,gst_efficiency,dram_utilization,parameter_count,epochs_to_quality,flops_per_forward";

    fn profiles(rows: &str) -> Result<ProfileDump> {
        parse_profiles(format!("{HEADER}\n{rows}").as_bytes())
    }

    #[test]
    fn dram_level_is_divided_by_ten() {
        let dump = profiles("w1,0.5,0.5,0.5,0.5,7,,,\n").unwrap();
        assert_eq!(dump.vectors[0].dram_utilization, Some(0.7));
        assert_eq!(dump.vectors[0].parameter_count, None);
    }

    #[test]
    fn percentages_become_fractions() {
        let dump = profiles("w1,0.5,0.5,87.5%,0.5,7,25000000,90,4.1e9\n").unwrap();
        let v = &dump.vectors[0];
        assert_eq!(v.gld_efficiency, Some(0.875));
        assert_eq!(v.parameter_count, Some(25_000_000));
        assert_eq!(v.independent_features(), Some([25e6, 90.0, 4.1e9]));
    }

    #[test]
    fn ratio_above_one_is_a_range_error() {
        let msg = profiles("w1,1.3,0.5,0.5,0.5,7,,,\n")
            .unwrap_err()
            .to_string();
        assert!(
            msg.contains("achieved_occupancy") && msg.contains("outside"),
            "{msg}"
        );
        assert!(msg.starts_with("line 2:"), "{msg}");
    }

    #[test]
    fn profile_errors() {
        assert!(matches!(
            parse_profiles("workload,occupancy\nw,1\n".as_bytes()),
            Err(Error::HeaderMismatch { .. })
        ));
        let msg = profiles("w1,abc,0.5,0.5,0.5,7,,,\n")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("non-numeric"), "{msg}");
        assert!(profiles("w1,NaN,0.5,0.5,0.5,7,,,\n").is_err());
        assert!(profiles("w1,0.5,0.5,0.5,0.5,11,,,\n").is_err());
        assert!(profiles("w1,0.5,0.5,0.5,0.5,1,,0,\n").is_err());
        assert!(profiles("w1,0.5,0.5,0.5,0.5,1,1.5,,\n").is_err());
        assert!(matches!(
            profiles("w1,0.5,0.5,0.5,0.5,1,,,\nw1,0.5,0.5,0.5,0.5,1,,,\n"),
            Err(Error::DuplicateId {
                first_line: 2,
                second_line: 3,
                ..
            })
        ));
    }

    #[test]
    fn decimal_comma_is_not_a_number() {
        assert!(profiles("w1,\"0,5\",0.5,0.5,0.5,7,,,\n").is_err());
    }
}
