//! Record parsing, internal-transaction coalescing, and ordered event
//! streams.
//!
//! Raw input is delimited text with eleven columns per record. Records
//! that belong to one on-chain transaction (an external call plus the
//! internal records it spawned) share a `tx_hash` and are coalesced
//! into a single [`TransactionEvent`]. Events are emitted in
//! non-decreasing timestamp order with `(block_number, tx_hash)` as the
//! deterministic tie-break, and addresses are interned to dense
//! [`NodeId`]s in emission order.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier assigned to an account address on first sight,
/// in stream order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One raw transaction record as exported from a block range: eleven
/// fields, numeric fields unsigned, addresses lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTransaction {
    pub sender: String,
    pub recipient: String,
    pub value_wei: u128,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub gas_price: u64,
    pub tx_hash: String,
    pub timestamp: u64,
    pub block_number: u64,
    pub sender_is_contract: bool,
    pub recipient_is_contract: bool,
}

/// One coalesced transaction event between two accounts.
///
/// `event_id` is the 0-based ordinal in the emitted stream; `root` is
/// the record the event's endpoints and value were taken from (the
/// first record of the group whose sender is not a contract, else the
/// group's first record).
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionEvent {
    pub event_id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: u64,
    pub internal_call_count: u32,
    pub root: RawTransaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Phishing,
    NonPhishing,
}

/// Address → label mapping with per-class counts.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    labels: HashMap<String, Label>,
    pub n_phishing: u64,
    pub n_non_phishing: u64,
}

impl LabelSet {
    pub fn insert(&mut self, address: String, label: Label) -> Result<(), IngestError> {
        let address = address.to_ascii_lowercase();
        if self.labels.contains_key(&address) {
            return Err(IngestError::DuplicateAddress(address));
        }
        match label {
            Label::Phishing => self.n_phishing += 1,
            Label::NonPhishing => self.n_non_phishing += 1,
        }
        self.labels.insert(address, label);
        Ok(())
    }

    pub fn get(&self, address: &str) -> Option<Label> {
        self.labels.get(address).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.labels.iter().map(|(a, l)| (a.as_str(), *l))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("empty transaction group")]
    EmptyGroup,
    #[error("duplicate address in label file: {0}")]
    DuplicateAddress(String),
    #[error("unknown label string: {0:?} (expected phishing | non_phishing)")]
    UnknownLabelString(String),
    #[error("empty label file")]
    EmptyFile,
    #[error(
        "out-of-order input in strict mode: timestamp {found} after {previous} (record {index})"
    )]
    OutOfOrderInput {
        index: usize,
        previous: u64,
        found: u64,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: {0}")]
    BadHeader(String),
}

/// The eleven record fields, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Sender,
    Recipient,
    ValueWei,
    GasLimit,
    GasUsed,
    GasPrice,
    TxHash,
    Timestamp,
    BlockNumber,
    SenderIsContract,
    RecipientIsContract,
}

pub const CANONICAL_FIELDS: [Field; 11] = [
    Field::Sender,
    Field::Recipient,
    Field::ValueWei,
    Field::GasLimit,
    Field::GasUsed,
    Field::GasPrice,
    Field::TxHash,
    Field::Timestamp,
    Field::BlockNumber,
    Field::SenderIsContract,
    Field::RecipientIsContract,
];

pub const CANONICAL_HEADER: [&str; 11] = [
    "sender",
    "recipient",
    "value_wei",
    "gas_limit",
    "gas_used",
    "gas_price",
    "tx_hash",
    "timestamp",
    "block_number",
    "sender_is_contract",
    "recipient_is_contract",
];

/// Field-order descriptor for a delimited input file.
#[derive(Debug, Clone)]
pub struct Schema {
    pub fields: [Field; 11],
    pub delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            fields: CANONICAL_FIELDS,
            delimiter: ',',
        }
    }
}

impl Schema {
    pub fn with_delimiter(delimiter: char) -> Self {
        Schema {
            fields: CANONICAL_FIELDS,
            delimiter,
        }
    }

    /// Build a schema from a header row, accepting any permutation of
    /// the canonical column names.
    pub fn from_header(header: &str, delimiter: char) -> Result<Self, IngestError> {
        let names: Vec<&str> = header.split(delimiter).map(str::trim).collect();
        if names.len() != 11 {
            return Err(IngestError::BadHeader(format!(
                "expected 11 columns, got {}",
                names.len()
            )));
        }
        let mut fields = [Field::Sender; 11];
        let mut seen = [false; 11];
        for (i, name) in names.iter().enumerate() {
            let pos = CANONICAL_HEADER
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| IngestError::BadHeader(format!("unknown column {name:?}")))?;
            if seen[pos] {
                return Err(IngestError::BadHeader(format!("duplicate column {name:?}")));
            }
            seen[pos] = true;
            fields[i] = CANONICAL_FIELDS[pos];
        }
        Ok(Schema {
            fields,
            delimiter,
        })
    }

    /// Header-based delimiter sniffing: tab wins if the first line
    /// contains one, else comma.
    pub fn sniff_delimiter(first_line: &str) -> char {
        if first_line.contains('\t') {
            '\t'
        } else {
            ','
        }
    }

    /// A line is a header iff its first field is not parseable as an
    /// address or number (column names never start with 0x or a digit).
    pub fn looks_like_header(line: &str, delimiter: char) -> bool {
        match line.split(delimiter).next() {
            Some(first) => {
                let first = first.trim();
                !first.starts_with("0x") && first.parse::<u128>().is_err() && !first.is_empty()
            }
            None => false,
        }
    }
}

fn parse_uint<T: std::str::FromStr>(raw: &str, what: &str, line: usize) -> Result<T, IngestError> {
    raw.trim().parse::<T>().map_err(|_| IngestError::MalformedRecord {
        line,
        reason: format!("{what} is not a non-negative integer: {raw:?}"),
    })
}

fn parse_bool(raw: &str, what: &str, line: usize) -> Result<bool, IngestError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        other => Err(IngestError::MalformedRecord {
            line,
            reason: format!("{what} is not a boolean: {other:?}"),
        }),
    }
}

fn parse_address(raw: &str, what: &str, line: usize) -> Result<String, IngestError> {
    let addr = raw.trim().to_ascii_lowercase();
    if !addr.starts_with("0x") || addr.len() < 3 || !addr[2..].bytes().all(|b| b.is_ascii_hexdigit())
    {
        return Err(IngestError::MalformedRecord {
            line,
            reason: format!("{what} is not a 0x-prefixed hex address: {raw:?}"),
        });
    }
    Ok(addr)
}

/// Parse one delimited record according to `schema`. `line_no` is only
/// used for error reporting.
pub fn parse_raw_record(
    line: &str,
    schema: &Schema,
    line_no: usize,
) -> Result<RawTransaction, IngestError> {
    let parts: Vec<&str> = line.split(schema.delimiter).collect();
    if parts.len() != 11 {
        return Err(IngestError::MalformedRecord {
            line: line_no,
            reason: format!("expected 11 fields, got {}", parts.len()),
        });
    }

    let mut sender = None;
    let mut recipient = None;
    let mut value_wei = None;
    let mut gas_limit = None;
    let mut gas_used = None;
    let mut gas_price = None;
    let mut tx_hash = None;
    let mut timestamp = None;
    let mut block_number = None;
    let mut sender_is_contract = None;
    let mut recipient_is_contract = None;

    for (raw, field) in parts.iter().zip(schema.fields.iter()) {
        match field {
            Field::Sender => sender = Some(parse_address(raw, "sender", line_no)?),
            Field::Recipient => recipient = Some(parse_address(raw, "recipient", line_no)?),
            Field::ValueWei => value_wei = Some(parse_uint::<u128>(raw, "value_wei", line_no)?),
            Field::GasLimit => gas_limit = Some(parse_uint::<u64>(raw, "gas_limit", line_no)?),
            Field::GasUsed => gas_used = Some(parse_uint::<u64>(raw, "gas_used", line_no)?),
            Field::GasPrice => gas_price = Some(parse_uint::<u64>(raw, "gas_price", line_no)?),
            Field::TxHash => {
                let h = raw.trim().to_ascii_lowercase();
                if h.len() != 66 || !h.starts_with("0x") || !h[2..].bytes().all(|b| b.is_ascii_hexdigit()) {
                    return Err(IngestError::MalformedRecord {
                        line: line_no,
                        reason: format!("tx_hash must be 66 hex chars starting 0x, got {raw:?}"),
                    });
                }
                tx_hash = Some(h);
            }
            Field::Timestamp => timestamp = Some(parse_uint::<u64>(raw, "timestamp", line_no)?),
            Field::BlockNumber => {
                block_number = Some(parse_uint::<u64>(raw, "block_number", line_no)?)
            }
            Field::SenderIsContract => {
                sender_is_contract = Some(parse_bool(raw, "sender_is_contract", line_no)?)
            }
            Field::RecipientIsContract => {
                recipient_is_contract = Some(parse_bool(raw, "recipient_is_contract", line_no)?)
            }
        }
    }

    let tx = RawTransaction {
        sender: sender.unwrap(),
        recipient: recipient.unwrap(),
        value_wei: value_wei.unwrap(),
        gas_limit: gas_limit.unwrap(),
        gas_used: gas_used.unwrap(),
        gas_price: gas_price.unwrap(),
        tx_hash: tx_hash.unwrap(),
        timestamp: timestamp.unwrap(),
        block_number: block_number.unwrap(),
        sender_is_contract: sender_is_contract.unwrap(),
        recipient_is_contract: recipient_is_contract.unwrap(),
    };
    if tx.gas_used > tx.gas_limit {
        return Err(IngestError::MalformedRecord {
            line: line_no,
            reason: format!("gas_used {} exceeds gas_limit {}", tx.gas_used, tx.gas_limit),
        });
    }
    Ok(tx)
}

/// Serialize a record back to one delimited line in canonical column
/// order. `parse_raw_record(serialize_raw_record(tx))` round-trips all
/// eleven fields exactly.
pub fn serialize_raw_record(tx: &RawTransaction, delimiter: char) -> String {
    let mut out = String::new();
    for (i, field) in CANONICAL_FIELDS.iter().enumerate() {
        if i > 0 {
            out.push(delimiter);
        }
        match field {
            Field::Sender => out.push_str(&tx.sender),
            Field::Recipient => out.push_str(&tx.recipient),
            Field::ValueWei => out.push_str(&tx.value_wei.to_string()),
            Field::GasLimit => out.push_str(&tx.gas_limit.to_string()),
            Field::GasUsed => out.push_str(&tx.gas_used.to_string()),
            Field::GasPrice => out.push_str(&tx.gas_price.to_string()),
            Field::TxHash => out.push_str(&tx.tx_hash),
            Field::Timestamp => out.push_str(&tx.timestamp.to_string()),
            Field::BlockNumber => out.push_str(&tx.block_number.to_string()),
            Field::SenderIsContract => out.push_str(if tx.sender_is_contract { "1" } else { "0" }),
            Field::RecipientIsContract => {
                out.push_str(if tx.recipient_is_contract { "1" } else { "0" })
            }
        }
    }
    out
}

/// Group of records sharing one `tx_hash`, coalesced to one event
/// keyed by the group's root record.
///
/// Root selection: the first record whose sender is not a contract
/// (external accounts initiate transactions), else the group's first
/// record.
pub fn coalesce_internal(records: &[RawTransaction]) -> Result<(RawTransaction, u32), IngestError> {
    if records.is_empty() {
        return Err(IngestError::EmptyGroup);
    }
    let root = records
        .iter()
        .find(|r| !r.sender_is_contract)
        .unwrap_or(&records[0]);
    Ok((root.clone(), records.len() as u32))
}

/// Interns addresses to dense node ids in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    by_address: HashMap<String, NodeId>,
    addresses: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, address: &str) -> NodeId {
        if let Some(&id) = self.by_address.get(address) {
            return id;
        }
        let id = NodeId(self.addresses.len() as u32);
        self.addresses.push(address.to_string());
        self.by_address.insert(address.to_string(), id);
        id
    }

    pub fn lookup(&self, address: &str) -> Option<NodeId> {
        self.by_address.get(address).copied()
    }

    pub fn address(&self, id: NodeId) -> &str {
        &self.addresses[id.index()]
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }
}

/// A fully materialized, ordered event stream plus the address
/// interner and ingest counters.
#[derive(Debug, Clone, Default)]
pub struct EventStream {
    pub events: Vec<TransactionEvent>,
    pub interner: Interner,
    pub skipped_records: u64,
    pub accepted_records: u64,
}

impl EventStream {
    pub fn n_nodes(&self) -> usize {
        self.interner.len()
    }
}

/// Build the ordered event stream from already-parsed records.
///
/// Records are grouped by `tx_hash` in first-occurrence order and
/// coalesced; events are then sorted by `(timestamp, block_number,
/// tx_hash)`. In strict mode the raw record timestamps must already be
/// non-decreasing.
pub fn stream_from_records(
    records: Vec<RawTransaction>,
    strict_order: bool,
    skipped_records: u64,
) -> Result<EventStream, IngestError> {
    if strict_order {
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(IngestError::OutOfOrderInput {
                    index: i + 1,
                    previous: pair[0].timestamp,
                    found: pair[1].timestamp,
                });
            }
        }
    }

    let accepted = records.len() as u64;

    // Group by hash, keeping first-occurrence order.
    let mut group_of: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<RawTransaction>> = Vec::new();
    for rec in records {
        match group_of.get(&rec.tx_hash) {
            Some(&g) => groups[g].push(rec),
            None => {
                group_of.insert(rec.tx_hash.clone(), groups.len());
                groups.push(vec![rec]);
            }
        }
    }

    let mut coalesced: Vec<(RawTransaction, u32)> = Vec::with_capacity(groups.len());
    for group in &groups {
        coalesced.push(coalesce_internal(group)?);
    }
    coalesced.sort_by(|(a, _), (b, _)| {
        (a.timestamp, a.block_number, a.tx_hash.as_str()).cmp(&(
            b.timestamp,
            b.block_number,
            b.tx_hash.as_str(),
        ))
    });

    let mut interner = Interner::default();
    let mut events = Vec::with_capacity(coalesced.len());
    for (i, (root, count)) in coalesced.into_iter().enumerate() {
        let src = interner.intern(&root.sender);
        let dst = interner.intern(&root.recipient);
        events.push(TransactionEvent {
            event_id: i as u64,
            src,
            dst,
            timestamp: root.timestamp,
            internal_call_count: count,
            root,
        });
    }

    Ok(EventStream {
        events,
        interner,
        skipped_records,
        accepted_records: accepted,
    })
}

/// Read a delimited transaction file and build the ordered event
/// stream. Malformed records are skipped and counted, never silently
/// dropped.
pub fn stream_events(path: &Path, strict_order: bool) -> Result<EventStream, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut lines = text.lines().enumerate().peekable();

    let (delimiter, schema) = match lines.peek() {
        Some((_, first)) => {
            let delimiter = Schema::sniff_delimiter(first);
            if Schema::looks_like_header(first, delimiter) {
                let schema = Schema::from_header(first, delimiter)?;
                lines.next();
                (delimiter, schema)
            } else {
                (delimiter, Schema::with_delimiter(delimiter))
            }
        }
        None => (',', Schema::default()),
    };
    let _ = delimiter;

    let mut records = Vec::new();
    let mut skipped = 0u64;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        match parse_raw_record(line, &schema, idx + 1) {
            Ok(rec) => records.push(rec),
            Err(IngestError::MalformedRecord { .. }) => skipped += 1,
            Err(other) => return Err(other),
        }
    }
    stream_from_records(records, strict_order, skipped)
}

/// Load a two-column `address,label` CSV. Labels must be `phishing` or
/// `non_phishing`; duplicate addresses and unknown labels are errors.
pub fn load_labels(path: &Path) -> Result<LabelSet, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<LabelSet, IngestError> {
    let mut set = LabelSet::default();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (addr, label) = line.split_once(',').ok_or_else(|| {
            IngestError::MalformedRecord {
                line: 0,
                reason: format!("label row is not two comma-separated columns: {line:?}"),
            }
        })?;
        let addr = addr.trim();
        if addr.eq_ignore_ascii_case("address") {
            continue; // header
        }
        let label = match label.trim().to_ascii_lowercase().as_str() {
            "phishing" => Label::Phishing,
            "non_phishing" => Label::NonPhishing,
            other => return Err(IngestError::UnknownLabelString(other.to_string())),
        };
        set.insert(addr.to_string(), label)?;
    }
    if set.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Ok(set)
}
