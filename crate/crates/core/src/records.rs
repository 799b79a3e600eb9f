//! Line-delimited record I/O.
//!
//! Every corpus file is UTF-8 text with one JSON object per line, so corpora
//! with hundreds of thousands of records stream through constant memory.
//! Four record kinds share this layer:
//!
//! - segments:    `{"product_id", "text", "polarity", "sample_count"?, "tags"?}`
//! - pairs:       `{"product_id", "positive", "negative"}`
//! - instances:   `{"id", "product_id", "positive", "negative",
//!                  "chosen_template", "output", "references", "split"}`
//! - predictions: `{"instance_id", "output"}`
//!
//! Nested `positive`/`negative` objects carry `{"text", "sample_count"?,
//! "tags"?}`; their polarity is implied by the field name and their product
//! by the record. Files written by the CLI start with one `{"header": ...}`
//! provenance line; the reader skips it transparently, so the write/read
//! round trip over records is the identity either way.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{
    join_tokens, CorpusError, OpinionPair, Polarity, PosTag, PredictionRecord, Reference, Segment,
    SnippetInstance, Split, TemplateId,
};

/// A record kind that can live in a line-delimited file.
pub trait Record: Sized {
    /// Short name used in diagnostics ("segment", "pair", ...).
    fn kind() -> &'static str;

    /// Decodes one line; errors carry `line_number`.
    fn decode(line: &str, line_number: usize) -> Result<Self, CorpusError>;

    /// Encodes the record as a single JSON line (no trailing newline).
    fn encode(&self) -> String;
}

fn require<T>(value: Option<T>, line: usize, field: &'static str) -> Result<T, CorpusError> {
    value.ok_or(CorpusError::MissingField { line, field })
}

fn invalid(line: usize, field: &'static str, message: impl Into<String>) -> CorpusError {
    CorpusError::InvalidField {
        line,
        field,
        message: message.into(),
    }
}

fn parse_json<'a, T: Deserialize<'a>>(line: &'a str, line_number: usize) -> Result<T, CorpusError> {
    serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
        line: line_number,
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("record serialization cannot fail")
}

fn parse_tags(raw: Vec<String>, line: usize) -> Result<Vec<PosTag>, CorpusError> {
    raw.iter()
        .map(|s| PosTag::parse(s).ok_or_else(|| invalid(line, "tags", format!("unknown tag {s:?}"))))
        .collect()
}

fn tags_to_strings(tags: &[PosTag]) -> Vec<String> {
    tags.iter().map(|t| t.as_str().to_string()).collect()
}

#[derive(Deserialize)]
struct RawSegment {
    product_id: Option<String>,
    text: Option<String>,
    polarity: Option<String>,
    sample_count: Option<u64>,
    tags: Option<Vec<String>>,
}

#[derive(Serialize)]
struct RawSegmentOut<'a> {
    product_id: &'a str,
    text: &'a str,
    polarity: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tags: Option<Vec<String>>,
}

impl Record for Segment {
    fn kind() -> &'static str {
        "segment"
    }

    fn decode(line: &str, line_number: usize) -> Result<Self, CorpusError> {
        let raw: RawSegment = parse_json(line, line_number)?;
        let product_id = require(raw.product_id, line_number, "product_id")?;
        let text = require(raw.text, line_number, "text")?;
        let polarity_raw = require(raw.polarity, line_number, "polarity")?;
        let polarity = Polarity::parse(&polarity_raw)
            .ok_or_else(|| invalid(line_number, "polarity", format!("unknown value {polarity_raw:?}")))?;
        let mut segment = Segment::new(product_id, text, polarity);
        if let Some(count) = raw.sample_count {
            segment = segment.with_sample_count(count);
        }
        if let Some(tags) = raw.tags {
            let tags = parse_tags(tags, line_number)?;
            segment = segment
                .with_tags(tags)
                .map_err(|e| invalid(line_number, "tags", e.to_string()))?;
        }
        Ok(segment)
    }

    fn encode(&self) -> String {
        to_json(&RawSegmentOut {
            product_id: self.product_id(),
            text: self.text(),
            polarity: self.polarity().as_str(),
            sample_count: self.sample_count(),
            tags: self.tags().map(tags_to_strings),
        })
    }
}

#[derive(Deserialize)]
struct RawNestedSegment {
    text: Option<String>,
    sample_count: Option<u64>,
    tags: Option<Vec<String>>,
}

#[derive(Serialize)]
struct RawNestedSegmentOut<'a> {
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tags: Option<Vec<String>>,
}

fn decode_nested(
    raw: RawNestedSegment,
    product_id: &str,
    polarity: Polarity,
    line: usize,
    field: &'static str,
) -> Result<Segment, CorpusError> {
    let text = raw
        .text
        .ok_or_else(|| invalid(line, field, "missing text"))?;
    let mut segment = Segment::new(product_id, text, polarity);
    if let Some(count) = raw.sample_count {
        segment = segment.with_sample_count(count);
    }
    if let Some(tags) = raw.tags {
        let tags = parse_tags(tags, line)?;
        segment = segment
            .with_tags(tags)
            .map_err(|e| invalid(line, field, e.to_string()))?;
    }
    Ok(segment)
}

fn encode_nested(segment: &Segment) -> RawNestedSegmentOut<'_> {
    RawNestedSegmentOut {
        text: segment.text(),
        sample_count: segment.sample_count(),
        tags: segment.tags().map(tags_to_strings),
    }
}

#[derive(Deserialize)]
struct RawPair {
    product_id: Option<String>,
    positive: Option<RawNestedSegment>,
    negative: Option<RawNestedSegment>,
}

#[derive(Serialize)]
struct RawPairOut<'a> {
    product_id: &'a str,
    positive: RawNestedSegmentOut<'a>,
    negative: RawNestedSegmentOut<'a>,
}

impl Record for OpinionPair {
    fn kind() -> &'static str {
        "pair"
    }

    fn decode(line: &str, line_number: usize) -> Result<Self, CorpusError> {
        let raw: RawPair = parse_json(line, line_number)?;
        let product_id = require(raw.product_id, line_number, "product_id")?;
        let positive = require(raw.positive, line_number, "positive")?;
        let negative = require(raw.negative, line_number, "negative")?;
        let positive = decode_nested(positive, &product_id, Polarity::Positive, line_number, "positive")?;
        let negative = decode_nested(negative, &product_id, Polarity::Negative, line_number, "negative")?;
        OpinionPair::new(positive, negative)
            .map_err(|e| invalid(line_number, "positive", e.to_string()))
    }

    fn encode(&self) -> String {
        to_json(&RawPairOut {
            product_id: self.product_id(),
            positive: encode_nested(self.positive()),
            negative: encode_nested(self.negative()),
        })
    }
}

#[derive(Deserialize)]
struct RawReference {
    template_id: Option<u8>,
    text: Option<String>,
}

#[derive(Serialize)]
struct RawReferenceOut {
    template_id: u8,
    text: String,
}

#[derive(Deserialize)]
struct RawInstance {
    id: Option<String>,
    product_id: Option<String>,
    positive: Option<RawNestedSegment>,
    negative: Option<RawNestedSegment>,
    chosen_template: Option<u8>,
    output: Option<String>,
    references: Option<Vec<RawReference>>,
    split: Option<String>,
}

#[derive(Serialize)]
struct RawInstanceOut<'a> {
    id: &'a str,
    product_id: &'a str,
    positive: RawNestedSegmentOut<'a>,
    negative: RawNestedSegmentOut<'a>,
    chosen_template: u8,
    output: String,
    references: Vec<RawReferenceOut>,
    split: &'a str,
}

impl Record for SnippetInstance {
    fn kind() -> &'static str {
        "instance"
    }

    fn decode(line: &str, line_number: usize) -> Result<Self, CorpusError> {
        let raw: RawInstance = parse_json(line, line_number)?;
        let id = require(raw.id, line_number, "id")?;
        let product_id = require(raw.product_id, line_number, "product_id")?;
        let positive = require(raw.positive, line_number, "positive")?;
        let negative = require(raw.negative, line_number, "negative")?;
        let chosen_raw = require(raw.chosen_template, line_number, "chosen_template")?;
        let output = require(raw.output, line_number, "output")?;
        let references_raw = require(raw.references, line_number, "references")?;
        let split_raw = require(raw.split, line_number, "split")?;

        let positive = decode_nested(positive, &product_id, Polarity::Positive, line_number, "positive")?;
        let negative = decode_nested(negative, &product_id, Polarity::Negative, line_number, "negative")?;
        let pair = OpinionPair::new(positive, negative)
            .map_err(|e| invalid(line_number, "positive", e.to_string()))?;
        let chosen_template = TemplateId::new(chosen_raw)
            .map_err(|e| invalid(line_number, "chosen_template", e.to_string()))?;
        let split = Split::parse(&split_raw)
            .ok_or_else(|| invalid(line_number, "split", format!("unknown value {split_raw:?}")))?;

        let mut references = Vec::with_capacity(references_raw.len());
        for entry in references_raw {
            let template_id = entry
                .template_id
                .ok_or_else(|| invalid(line_number, "references", "missing template_id"))?;
            let template_id = TemplateId::new(template_id)
                .map_err(|e| invalid(line_number, "references", e.to_string()))?;
            let text = entry
                .text
                .ok_or_else(|| invalid(line_number, "references", "missing text"))?;
            references.push(Reference {
                template_id,
                tokens: crate::corpus::tokenize(&text),
            });
        }

        let instance = SnippetInstance::new(id, pair, references, chosen_template, split)
            .map_err(|e| invalid(line_number, "references", e.to_string()))?;
        if instance.chosen_reference().tokens != crate::corpus::tokenize(&output) {
            return Err(invalid(
                line_number,
                "output",
                "does not match the chosen reference",
            ));
        }
        Ok(instance)
    }

    fn encode(&self) -> String {
        to_json(&RawInstanceOut {
            id: self.id(),
            product_id: self.pair().product_id(),
            positive: encode_nested(self.pair().positive()),
            negative: encode_nested(self.pair().negative()),
            chosen_template: self.chosen_template().get(),
            output: join_tokens(&self.chosen_reference().tokens),
            references: self
                .references()
                .iter()
                .map(|r| RawReferenceOut {
                    template_id: r.template_id.get(),
                    text: join_tokens(&r.tokens),
                })
                .collect(),
            split: self.split().as_str(),
        })
    }
}

#[derive(Deserialize)]
struct RawPrediction {
    instance_id: Option<String>,
    output: Option<String>,
}

#[derive(Serialize)]
struct RawPredictionOut<'a> {
    instance_id: &'a str,
    output: String,
}

impl Record for PredictionRecord {
    fn kind() -> &'static str {
        "prediction"
    }

    fn decode(line: &str, line_number: usize) -> Result<Self, CorpusError> {
        let raw: RawPrediction = parse_json(line, line_number)?;
        let instance_id = require(raw.instance_id, line_number, "instance_id")?;
        let output = require(raw.output, line_number, "output")?;
        PredictionRecord::new(instance_id, &output)
            .map_err(|e| invalid(line_number, "output", e.to_string()))
    }

    fn encode(&self) -> String {
        to_json(&RawPredictionOut {
            instance_id: self.instance_id(),
            output: join_tokens(self.output_tokens()),
        })
    }
}

/// Provenance line written at the top of CLI outputs: the command that
/// produced the file, its seed when one applies, and the effective config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileHeader {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: Value,
}

impl FileHeader {
    pub fn new(command: impl Into<String>, seed: Option<u64>, config: Value) -> Self {
        FileHeader {
            command: command.into(),
            seed,
            config,
        }
    }

    pub fn encode(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            header: &'a FileHeader,
        }
        to_json(&Line { header: self })
    }
}

fn is_header_line(line: &str) -> bool {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(map)) => map.len() == 1 && map.contains_key("header"),
        _ => false,
    }
}

/// Streaming reader: yields one decoded record per line, never buffering the
/// whole file. A single leading header line is skipped.
pub struct RecordReader<R: BufRead, T: Record> {
    reader: R,
    buffer: String,
    line_number: usize,
    at_start: bool,
    _marker: PhantomData<T>,
}

impl<R: BufRead, T: Record> RecordReader<R, T> {
    pub fn new(reader: R) -> Self {
        RecordReader {
            reader,
            buffer: String::new(),
            line_number: 0,
            at_start: true,
            _marker: PhantomData,
        }
    }
}

impl<R: BufRead, T: Record> Iterator for RecordReader<R, T> {
    type Item = Result<T, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buffer.clear();
            match self.reader.read_line(&mut self.buffer) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(CorpusError::Io(e))),
            }
            self.line_number += 1;
            let line = self.buffer.trim_end_matches(['\n', '\r']);
            if self.at_start {
                self.at_start = false;
                if is_header_line(line) {
                    continue;
                }
            }
            return Some(T::decode(line, self.line_number));
        }
    }
}

fn open_file(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::File {
        path: path.display().to_string(),
        source,
    })
}

fn create_file(path: &Path) -> Result<File, CorpusError> {
    File::create(path).map_err(|source| CorpusError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Opens a streaming reader over a record file.
pub fn read_records<T: Record>(
    path: impl AsRef<Path>,
) -> Result<RecordReader<BufReader<File>, T>, CorpusError> {
    Ok(RecordReader::new(BufReader::new(open_file(path.as_ref())?)))
}

/// Reads a whole record file into memory.
pub fn collect_records<T: Record>(path: impl AsRef<Path>) -> Result<Vec<T>, CorpusError> {
    read_records(path)?.collect()
}

/// Streams records into a writer, one line each. Returns the record count.
pub fn write_records_to<T: Record, W: Write, I>(writer: W, records: I) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = T>,
{
    let mut writer = BufWriter::new(writer);
    let mut count = 0;
    for record in records {
        writer.write_all(record.encode().as_bytes())?;
        writer.write_all(b"\n")?;
        count += 1;
    }
    writer.flush()?;
    Ok(count)
}

/// Streams records into a file. `read_records(write_records(xs)) == xs`.
pub fn write_records<T: Record, I>(path: impl AsRef<Path>, records: I) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = T>,
{
    write_records_to(create_file(path.as_ref())?, records)
}

/// Like [`write_records`] but prepends one provenance header line.
pub fn write_records_with_header<T: Record, I>(
    path: impl AsRef<Path>,
    header: &FileHeader,
    records: I,
) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = T>,
{
    let mut writer = BufWriter::new(create_file(path.as_ref())?);
    writer.write_all(header.encode().as_bytes())?;
    writer.write_all(b"\n")?;
    let mut count = 0;
    for record in records {
        writer.write_all(record.encode().as_bytes())?;
        writer.write_all(b"\n")?;
        count += 1;
    }
    writer.flush()?;
    Ok(count)
}
