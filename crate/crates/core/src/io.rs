//! CSV datasets, in-process topic replay and trace files.
//!
//! CSV dialect: comma separated, header row first, `.` decimals, UTF-8.
//! Fields are quoted only when they need it. The label is the last column
//! unless named explicitly.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::eval::{MetricTrace, RunMeta, TraceEvent, TraceRecord};
use crate::types::{validate_instance, Feature, FeatureSchema, Instance, PredictorStatus, StreamSource};
use crate::{Error, Result};

/// Values treated as missing when deciding a column's type.
fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "?"
}

fn label_index(header: &csv::StringRecord, label: Option<&str>) -> Result<usize> {
    match label {
        None => header.len().checked_sub(1).ok_or(Error::Empty("header")),
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingLabelColumn(name.to_string())),
    }
}

fn check_arity(rec: &csv::StringRecord, expected: usize, row: usize) -> Result<()> {
    if rec.len() != expected {
        return Err(Error::RowArity {
            row,
            expected,
            actual: rec.len(),
        });
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).from_reader(r)
}

/// Infers a schema from CSV text.
///
/// A feature column is numeric iff every value among the first
/// `sample_rows` data rows parses as a real; otherwise it is categorical
/// with the distinct values of the whole file in first-seen order. Classes
/// are the distinct label values in first-seen order. Data rows are
/// numbered from 1 in errors.
pub fn infer_schema_from_reader<R: Read>(
    r: R,
    label: Option<&str>,
    sample_rows: usize,
) -> Result<FeatureSchema> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let li = label_index(&header, label)?;
    let d = header.len();
    // per column: sampled all-numeric, first numeric row, first missing row
    let mut numeric = vec![true; d];
    let mut first_number: Vec<Option<usize>> = vec![None; d];
    let mut first_missing: Vec<Option<usize>> = vec![None; d];
    let mut vocab: Vec<Vec<String>> = vec![Vec::new(); d];
    let mut seen: Vec<HashSet<String>> = vec![HashSet::new(); d];
    let mut n_rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        check_arity(&rec, d, row)?;
        n_rows += 1;
        for (j, v) in rec.iter().enumerate() {
            if row <= sample_rows.max(1) && j != li {
                if is_missing(v) {
                    first_missing[j].get_or_insert(row);
                    numeric[j] = false;
                } else if v.trim().parse::<f64>().is_ok() {
                    first_number[j].get_or_insert(row);
                } else {
                    numeric[j] = false;
                }
            }
            if seen[j].insert(v.to_string()) {
                vocab[j].push(v.to_string());
            }
        }
    }
    if n_rows == 0 {
        return Err(Error::Empty("dataset"));
    }
    let mut features = Vec::with_capacity(d - 1);
    for j in (0..d).filter(|&j| j != li) {
        if let (Some(a), Some(b)) = (first_number[j], first_missing[j]) {
            return Err(Error::MixedParse {
                column: header[j].to_string(),
                row: a.max(b),
            });
        }
        if numeric[j] {
            features.push(Feature::numeric(&header[j]));
        } else {
            let mut values = std::mem::take(&mut vocab[j]);
            if values.len() < 2 {
                // a constant column still needs two symbols to be a feature
                values.push(format!("{}~other", values.first().map_or("", String::as_str)));
            }
            features.push(Feature::categorical(&header[j], values));
        }
    }
    FeatureSchema::new(features, &header[li], std::mem::take(&mut vocab[li]))
}

pub fn infer_schema(path: &Path, label: Option<&str>, sample_rows: usize) -> Result<FeatureSchema> {
    infer_schema_from_reader(File::open(path)?, label, sample_rows)
}

/// Streams the rows of a CSV file as instances in file order.
pub struct CsvReplay<R: Read = File> {
    schema: FeatureSchema,
    records: csv::StringRecordsIntoIter<R>,
    label_col: usize,
    lookups: Vec<Option<HashMap<String, usize>>>,
    classes: HashMap<String, usize>,
    width: usize,
    row: usize,
}

impl<R: Read> CsvReplay<R> {
    pub fn from_reader(r: R, schema: FeatureSchema, label: Option<&str>) -> Result<Self> {
        schema.check()?;
        let mut rdr = reader(r);
        let header = rdr.headers()?.clone();
        let label_col = label_index(&header, label)?;
        if label.is_none() && header.get(label_col) != Some(schema.label.as_str()) {
            return Err(Error::MissingLabelColumn(schema.label.clone()));
        }
        let names: Vec<&str> = header
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label_col)
            .map(|(_, h)| h)
            .collect();
        let expected: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
        if names != expected {
            return Err(Error::InvalidSchema(format!(
                "file columns {names:?} do not match schema features {expected:?}"
            )));
        }
        let lookups = schema
            .features
            .iter()
            .map(|f| match &f.kind {
                crate::types::FeatureKind::Numeric => None,
                crate::types::FeatureKind::Categorical { values } => Some(
                    values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (v.clone(), i))
                        .collect(),
                ),
            })
            .collect();
        let classes = schema
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Ok(CsvReplay {
            width: header.len(),
            schema,
            records: rdr.into_records(),
            label_col,
            lookups,
            classes,
            row: 0,
        })
    }

    fn parse(&self, rec: &csv::StringRecord) -> Result<Instance> {
        check_arity(rec, self.width, self.row)?;
        let mut x = Vec::with_capacity(self.schema.n_features());
        let mut y = None;
        let mut f = 0;
        for (j, v) in rec.iter().enumerate() {
            if j == self.label_col {
                if !is_missing(v) {
                    y = Some(
                        *self
                            .classes
                            .get(v)
                            .ok_or_else(|| Error::UnknownLabel(v.to_string()))?,
                    );
                }
                continue;
            }
            let feature = &self.schema.features[f];
            x.push(match &self.lookups[f] {
                None => v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidSchema(format!("`{v}` is not a number for `{}`", feature.name))
                })?,
                Some(lookup) => *lookup.get(v).ok_or_else(|| {
                    Error::InvalidSchema(format!("unknown value `{v}` for `{}`", feature.name))
                })? as f64,
            });
            f += 1;
        }
        validate_instance(Instance::new(x, y, (self.row - 1) as u64), &self.schema)
    }
}

impl<R: Read + Send> StreamSource for CsvReplay<R> {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let Some(rec) = self.records.next() else {
            return Ok(None);
        };
        self.row += 1;
        let row = self.row;
        rec.map_err(Error::from)
            .and_then(|rec| self.parse(&rec))
            .map(Some)
            .map_err(|e| e.at_row(row))
    }
}

pub fn replay_csv(path: &Path, schema: FeatureSchema, label: Option<&str>) -> Result<CsvReplay> {
    CsvReplay::from_reader(File::open(path)?, schema, label)
}

/// Writes instances in the canonical dialect: features then label, values
/// by name for categoricals and classes.
pub fn write_dataset_to<W: Write>(
    w: W,
    schema: &FeatureSchema,
    instances: impl IntoIterator<Item = Result<Instance>>,
) -> Result<u64> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = schema.features.iter().map(|f| f.name.as_str()).collect();
    header.push(&schema.label);
    wtr.write_record(&header)?;
    let mut n = 0;
    let mut fields = Vec::with_capacity(header.len());
    for inst in instances {
        let inst = inst?;
        fields.clear();
        for (f, &v) in schema.features.iter().zip(&inst.x) {
            fields.push(match &f.kind {
                crate::types::FeatureKind::Numeric => v.to_string(),
                crate::types::FeatureKind::Categorical { values } => values[v as usize].clone(),
            });
        }
        fields.push(inst.y.map_or(String::new(), |y| schema.classes[y].clone()));
        wtr.write_record(&fields)?;
        n += 1;
    }
    wtr.flush()?;
    Ok(n)
}

pub fn write_dataset(
    path: &Path,
    schema: &FeatureSchema,
    instances: impl IntoIterator<Item = Result<Instance>>,
) -> Result<u64> {
    write_dataset_to(File::create(path)?, schema, instances)
}

// ---------------------------------------------------------------------------

#[derive(Debug)]
struct TopicState {
    items: Vec<Instance>,
    closed: bool,
}

/// Append-only instance log with independent blocking subscribers.
#[derive(Debug, Clone)]
pub struct Topic {
    name: String,
    schema: FeatureSchema,
    capacity: Option<usize>,
    shared: Arc<(Mutex<TopicState>, Condvar)>,
}

impl Topic {
    /// `capacity` bounds the number of publications; exceeding it is an
    /// error rather than a silent drop.
    pub fn new(name: &str, schema: FeatureSchema, capacity: Option<usize>) -> Self {
        Topic {
            name: name.to_string(),
            schema,
            capacity,
            shared: Arc::new((
                Mutex::new(TopicState {
                    items: Vec::new(),
                    closed: false,
                }),
                Condvar::new(),
            )),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn state(&self) -> std::sync::MutexGuard<'_, TopicState> {
        self.shared.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn publish(&self, inst: Instance) -> Result<()> {
        let inst = validate_instance(inst, &self.schema)?;
        let mut s = self.state();
        if s.closed {
            return Err(Error::TopicClosed(self.name.clone()));
        }
        if self.capacity.is_some_and(|c| s.items.len() >= c) {
            return Err(Error::TopicOverflow {
                name: self.name.clone(),
                capacity: self.capacity.unwrap(),
            });
        }
        s.items.push(inst);
        drop(s);
        self.shared.1.notify_all();
        Ok(())
    }

    /// Publishes every instance of a source, then leaves the topic open.
    pub fn publish_all(&self, src: &mut dyn StreamSource) -> Result<u64> {
        let mut n = 0;
        while let Some(inst) = src.next_instance()? {
            self.publish(inst)?;
            n += 1;
        }
        Ok(n)
    }

    /// Subscribers drain what is published and then end.
    pub fn close(&self) {
        self.state().closed = true;
        self.shared.1.notify_all();
    }

    pub fn len(&self) -> usize {
        self.state().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A new reader starting at the first publication.
    pub fn subscribe(&self) -> Subscription {
        Subscription {
            topic: self.clone(),
            cursor: 0,
        }
    }
}

/// One subscriber's cursor; blocks while caught up on an open topic.
#[derive(Debug)]
pub struct Subscription {
    topic: Topic,
    cursor: usize,
}

impl StreamSource for Subscription {
    fn schema(&self) -> &FeatureSchema {
        &self.topic.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let (lock, cv) = &*self.topic.shared;
        let mut s = lock.lock().unwrap_or_else(|e| e.into_inner());
        while self.cursor >= s.items.len() && !s.closed {
            s = cv.wait(s).unwrap_or_else(|e| e.into_inner());
        }
        let Some(inst) = s.items.get(self.cursor) else {
            return Ok(None);
        };
        let mut inst = inst.clone();
        inst.seq = self.cursor as u64;
        self.cursor += 1;
        Ok(Some(inst))
    }
}

/// Named topics shared by publishers and subscribers.
#[derive(Debug, Default)]
pub struct Broker {
    topics: Mutex<HashMap<String, Topic>>,
}

impl Broker {
    pub fn new() -> Self {
        Broker::default()
    }

    /// Returns the existing topic of that name or creates it.
    pub fn topic(&self, name: &str, schema: &FeatureSchema, capacity: Option<usize>) -> Topic {
        self.topics
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(name.to_string())
            .or_insert_with(|| Topic::new(name, schema.clone(), capacity))
            .clone()
    }

    pub fn get(&self, name: &str) -> Result<Topic> {
        self.topics
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownTopic(name.to_string()))
    }

    pub fn subscribe(&self, name: &str) -> Result<Subscription> {
        Ok(self.get(name)?.subscribe())
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Json => "json",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "json" => Ok(TraceFormat::Json),
            other => Err(Error::param("format", format!("`{other}` is not csv or json"))),
        }
    }
}

pub const TRACE_COLUMNS: [&str; 6] = [
    "seq",
    "cum_accuracy",
    "window_accuracy",
    "kappa",
    "drift",
    "active_learner",
];

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct JsonTrace {
    format_version: u32,
    meta: RunMeta,
    records: Vec<TraceRecord>,
}

fn encode_events(events: &[TraceEvent]) -> String {
    events
        .iter()
        .map(|e| match e {
            TraceEvent::Drift {
                seq,
                detector,
                status,
            } => format!("{seq}@{detector}@{}", status.as_str()),
            TraceEvent::Switch { seq, active } => format!("{seq}@switch@{active}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_events(cell: &str) -> Result<Vec<TraceEvent>> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';')
        .map(|item| {
            let bad = || Error::MalformedTrace(format!("bad event `{item}`"));
            let mut parts = item.splitn(3, '@');
            let (Some(seq), Some(kind), Some(value)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let seq = seq.parse().map_err(|_| bad())?;
            if kind == "switch" {
                Ok(TraceEvent::Switch {
                    seq,
                    active: value.parse().map_err(|_| bad())?,
                })
            } else {
                Ok(TraceEvent::Drift {
                    seq,
                    detector: kind.to_string(),
                    status: PredictorStatus::parse(value).ok_or_else(bad)?,
                })
            }
        })
        .collect()
}

/// Writes a trace. CSV carries exactly [`TRACE_COLUMNS`]; JSON adds the run
/// descriptor and a format version.
pub fn write_trace_to<W: Write>(trace: &MetricTrace, w: W, format: TraceFormat) -> Result<()> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    match format {
        TraceFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(TRACE_COLUMNS)?;
            for r in &trace.records {
                wtr.write_record([
                    r.seq.to_string(),
                    r.cum_accuracy.to_string(),
                    r.window_accuracy.to_string(),
                    r.kappa.to_string(),
                    encode_events(&r.events),
                    r.active_learner.map_or(String::new(), |a| a.to_string()),
                ])?;
            }
            wtr.flush()?;
        }
        TraceFormat::Json => {
            let doc = JsonTrace {
                format_version: TRACE_FORMAT_VERSION,
                meta: trace.meta.clone(),
                records: trace.records.clone(),
            };
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_trace(trace: &MetricTrace, path: &Path, format: TraceFormat) -> Result<()> {
    if trace.records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    write_trace_to(trace, File::create(path)?, format)
}

pub fn read_trace_from<R: Read>(r: R, format: TraceFormat) -> Result<MetricTrace> {
    match format {
        TraceFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(r);
            let header = rdr.headers()?.clone();
            if header.iter().ne(TRACE_COLUMNS) {
                return Err(Error::MalformedTrace(format!(
                    "unexpected columns {:?}",
                    header.iter().collect::<Vec<_>>()
                )));
            }
            let mut records = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let bad = |what: &str| Error::MalformedTrace(format!("row {}: bad {what}", i + 1));
                let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
                records.push(TraceRecord {
                    seq: rec[0].parse().map_err(|_| bad("seq"))?,
                    cum_accuracy: num(1, "cum_accuracy")?,
                    window_accuracy: num(2, "window_accuracy")?,
                    kappa: num(3, "kappa")?,
                    events: decode_events(&rec[4])?,
                    active_learner: match &rec[5] {
                        "" => None,
                        a => Some(a.parse().map_err(|_| bad("active_learner"))?),
                    },
                    incomplete: false,
                });
            }
            if records.is_empty() {
                return Err(Error::EmptyTrace);
            }
            Ok(MetricTrace {
                meta: RunMeta::default(),
                records,
                audit: None,
            })
        }
        TraceFormat::Json => {
            let doc: JsonTrace = serde_json::from_reader(r)?;
            if doc.format_version != TRACE_FORMAT_VERSION {
                return Err(Error::MalformedTrace(format!(
                    "format version {} is not supported",
                    doc.format_version
                )));
            }
            if doc.records.is_empty() {
                return Err(Error::EmptyTrace);
            }
            Ok(MetricTrace {
                meta: doc.meta,
                records: doc.records,
                audit: None,
            })
        }
    }
}

pub fn read_trace(path: &Path, format: TraceFormat) -> Result<MetricTrace> {
    read_trace_from(File::open(path)?, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_generator, Family, GeneratorParams};
    use crate::types::{collect_n, FeatureKind};
    use proptest::prelude::*;
    use std::thread;

    fn infer(text: &str) -> Result<FeatureSchema> {
        infer_schema_from_reader(text.as_bytes(), None, 1000)
    }

    #[test]
    fn column_typing() {
        let s = infer("a,b,y\n1.5,red,0\n2.0,blue,1\n-3,red,0\n").unwrap();
        assert!(s.features[0].kind.is_numeric());
        assert_eq!(s.features[1].kind.arity(), Some(2));
        assert_eq!(s.classes, vec!["0", "1"]);
        assert_eq!(s.label, "y");
    }

    #[test]
    fn label_by_name_and_first_seen_class_order() {
        let s = infer_schema_from_reader("y,a\nno,1\nyes,2\nno,3\n".as_bytes(), Some("y"), 10).unwrap();
        assert_eq!(s.classes, vec!["no", "yes"]);
        assert_eq!(s.n_features(), 1);
        assert!(matches!(
            infer_schema_from_reader("y,a\n0,1\n".as_bytes(), Some("z"), 10),
            Err(Error::MissingLabelColumn(_))
        ));
    }

    #[test]
    fn inference_errors() {
        assert!(matches!(infer(""), Err(Error::Empty(_))));
        assert!(matches!(infer("a,y\n"), Err(Error::Empty(_))));
        assert!(matches!(
            infer("a,y\n1,0\n2\n"),
            Err(Error::RowArity { row: 2, expected: 2, actual: 1 })
        ));
        assert!(matches!(
            infer("a,y\n1,0\n2,1\n?,0\n"),
            Err(Error::MixedParse { row: 3, .. })
        ));
        // words and numbers together are simply categorical
        let s = infer("a,y\n1,0\nred,1\n").unwrap();
        assert_eq!(s.features[0].kind.arity(), Some(2));
    }

    #[test]
    fn replay_yields_rows_in_order() {
        let text = "a,b,y\n1.5,red,0\n2,blue,1\n3,red,0\n";
        let schema = infer(text).unwrap();
        let collect = || {
            let mut r = CsvReplay::from_reader(text.as_bytes(), schema.clone(), None).unwrap();
            let mut out = Vec::new();
            while let Some(i) = r.next_instance().unwrap() {
                out.push(i);
            }
            out
        };
        let a = collect();
        assert_eq!(a.len(), 3);
        assert_eq!(a[1], Instance::labeled(vec![2.0, 1.0], 1, 1));
        assert_eq!(a, collect());
    }

    #[test]
    fn bad_row_is_named() {
        let schema = infer("a,b,y\n1,red,0\n2,blue,1\n").unwrap();
        let text = "a,b,y\n1,red,0\n2,green,1\n";
        let mut r = CsvReplay::from_reader(text.as_bytes(), schema.clone(), None).unwrap();
        assert!(r.next_instance().unwrap().is_some());
        let err = r.next_instance().unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
        assert!(err.to_string().starts_with("row 2:"));
        let mut r = CsvReplay::from_reader("a,b,y\nx,red,0\n".as_bytes(), schema.clone(), None).unwrap();
        assert!(matches!(r.next_instance(), Err(Error::Row { row: 1, .. })));
        assert!(CsvReplay::from_reader("q,b,y\n".as_bytes(), schema, None).is_err());
    }

    #[test]
    fn generated_file_infers_equivalent_schema() {
        for family in Family::ALL {
            let mut g = build_generator(family, 0, 3, &GeneratorParams::default()).unwrap();
            let schema = g.schema().clone();
            let data = collect_n(&mut g, 3000).unwrap();
            let mut buf = Vec::new();
            write_dataset_to(&mut buf, &schema, data.iter().cloned().map(Ok)).unwrap();
            let inferred = infer_schema_from_reader(buf.as_slice(), None, 1000).unwrap();
            assert_eq!(inferred.n_features(), schema.n_features(), "{family:?}");
            assert_eq!(inferred.label, schema.label);
            let sorted = |mut v: Vec<String>| {
                v.sort();
                v
            };
            assert_eq!(sorted(inferred.classes.clone()), sorted(schema.classes.clone()));
            for (a, b) in inferred.features.iter().zip(&schema.features) {
                assert_eq!(a.name, b.name);
                match (&a.kind, &b.kind) {
                    (FeatureKind::Numeric, FeatureKind::Numeric) => {}
                    (FeatureKind::Categorical { values: va }, FeatureKind::Categorical { values: vb }) => {
                        assert_eq!(sorted(va.clone()), sorted(vb.clone()), "{family:?} {}", a.name);
                    }
                    _ => panic!("{family:?}: kind of {} changed", a.name),
                }
            }
            // and the file replays under its original schema
            let mut r = CsvReplay::from_reader(buf.as_slice(), schema, None).unwrap();
            let replayed = collect_n(&mut r, 3000).unwrap();
            assert_eq!(replayed, data, "{family:?}");
        }
    }

    fn tiny_schema() -> FeatureSchema {
        FeatureSchema::new(vec![Feature::numeric("a")], "y", vec!["0".into(), "1".into()]).unwrap()
    }

    fn inst(v: f64) -> Instance {
        Instance::labeled(vec![v], 0, 0)
    }

    fn drain(s: &mut Subscription) -> Vec<f64> {
        let mut out = Vec::new();
        while let Some(i) = s.next_instance().unwrap() {
            out.push(i.x[0]);
        }
        out
    }

    #[test]
    fn topic_replays_to_independent_subscribers() {
        let broker = Broker::new();
        let t = broker.topic("t", &tiny_schema(), None);
        for v in [1.0, 2.0, 3.0] {
            t.publish(inst(v)).unwrap();
        }
        t.close();
        let mut a = broker.subscribe("t").unwrap();
        let mut b = broker.subscribe("t").unwrap();
        assert_eq!(a.next_instance().unwrap().unwrap().x[0], 1.0);
        assert_eq!(drain(&mut b), vec![1.0, 2.0, 3.0]);
        assert_eq!(drain(&mut a), vec![2.0, 3.0]);
        assert!(matches!(broker.subscribe("nope"), Err(Error::UnknownTopic(_))));
        assert!(matches!(t.publish(inst(4.0)), Err(Error::TopicClosed(_))));
    }

    #[test]
    fn subscriber_blocks_until_publication() {
        let t = Topic::new("live", tiny_schema(), None);
        let mut sub = t.subscribe();
        let reader = thread::spawn(move || drain(&mut sub));
        thread::sleep(std::time::Duration::from_millis(20));
        t.publish(inst(7.0)).unwrap();
        t.publish(inst(8.0)).unwrap();
        t.close();
        assert_eq!(reader.join().unwrap(), vec![7.0, 8.0]);
    }

    #[test]
    fn capacity_overflow_is_loud() {
        let t = Topic::new("small", tiny_schema(), Some(2));
        t.publish(inst(1.0)).unwrap();
        t.publish(inst(2.0)).unwrap();
        assert!(matches!(t.publish(inst(3.0)), Err(Error::TopicOverflow { capacity: 2, .. })));
        assert_eq!(t.len(), 2);
    }

    proptest! {
        #[test]
        fn concurrent_replay_preserves_order(values in prop::collection::vec(-1e6f64..1e6, 0..200)) {
            let t = Topic::new("p", tiny_schema(), None);
            let readers: Vec<_> = (0..3)
                .map(|_| {
                    let mut s = t.subscribe();
                    thread::spawn(move || drain(&mut s))
                })
                .collect();
            for &v in &values {
                t.publish(inst(v)).unwrap();
            }
            t.close();
            for r in readers {
                prop_assert_eq!(r.join().unwrap(), values.clone());
            }
        }
    }

    fn sample_trace(n: usize) -> MetricTrace {
        MetricTrace {
            meta: RunMeta {
                dataset: "sea".into(),
                learner: "naive_bayes".into(),
                seed: 3,
                protocol: "prequential".into(),
            },
            records: (0..n)
                .map(|i| TraceRecord {
                    seq: (i as u64 + 1) * 100 - 1,
                    cum_accuracy: 1.0 / (i as f64 + 3.0),
                    window_accuracy: (i as f64 * 0.1).sin().abs(),
                    kappa: -0.1 + i as f64 / 7.0,
                    events: if i % 3 == 0 {
                        vec![
                            TraceEvent::Drift {
                                seq: i as u64 * 100 + 5,
                                detector: "adwin".into(),
                                status: PredictorStatus::Drift,
                            },
                            TraceEvent::Switch {
                                seq: i as u64 * 100 + 7,
                                active: 2,
                            },
                        ]
                    } else {
                        Vec::new()
                    },
                    active_learner: (i % 2 == 0).then_some(i % 4),
                    incomplete: false,
                })
                .collect(),
            audit: None,
        }
    }

    #[test]
    fn csv_trace_layout_and_round_trip() {
        let trace = sample_trace(10);
        let mut buf = Vec::new();
        write_trace_to(&trace, &mut buf, TraceFormat::Csv).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "seq,cum_accuracy,window_accuracy,kappa,drift,active_learner");
        assert!(lines[1].contains("5@adwin@drift;7@switch@2"));
        let back = read_trace_from(buf.as_slice(), TraceFormat::Csv).unwrap();
        assert_eq!(back.records, trace.records);
    }

    #[test]
    fn json_trace_round_trip_keeps_meta() {
        let trace = sample_trace(4);
        let mut buf = Vec::new();
        write_trace_to(&trace, &mut buf, TraceFormat::Json).unwrap();
        let back = read_trace_from(buf.as_slice(), TraceFormat::Json).unwrap();
        assert_eq!(back.meta, trace.meta);
        assert_eq!(back.records, trace.records);
        let text = String::from_utf8(buf).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(read_trace_from(text.as_bytes(), TraceFormat::Json).is_err());
    }

    #[test]
    fn empty_trace_is_rejected() {
        let mut buf = Vec::new();
        assert!(matches!(
            write_trace_to(&MetricTrace::default(), &mut buf, TraceFormat::Csv),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn trace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let trace = sample_trace(3);
        for format in [TraceFormat::Csv, TraceFormat::Json] {
            let path = dir.path().join(format!("t.{}", format.extension()));
            write_trace(&trace, &path, format).unwrap();
            assert_eq!(TraceFormat::from_path(&path), Some(format));
            assert_eq!(read_trace(&path, format).unwrap().records, trace.records);
        }
        assert!(write_trace(&trace, &dir.path().join("missing/t.csv"), TraceFormat::Csv).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(values in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 1..40)) {
            let trace = MetricTrace {
                records: values.iter().enumerate().map(|(i, &(a, k))| TraceRecord {
                    seq: i as u64,
                    cum_accuracy: a,
                    window_accuracy: 1.0 - a,
                    kappa: k,
                    events: Vec::new(),
                    active_learner: None,
                    incomplete: false,
                }).collect(),
                ..MetricTrace::default()
            };
            let mut buf = Vec::new();
            write_trace_to(&trace, &mut buf, TraceFormat::Csv).unwrap();
            let back = read_trace_from(buf.as_slice(), TraceFormat::Csv).unwrap();
            prop_assert_eq!(back.records, trace.records);
        }
    }
}
