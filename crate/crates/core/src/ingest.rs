//! Word streams: binary little-endian pipes and files, the dieharder-style
//! text format, and internal generators, all behind one sequential reader.
//!
//! Text format:
//!
//! ```text
//! type: d
//! count: <decimal>
//! numbit: <32|64>
//! <decimal>
//! ...
//! ```
//!
//! Header keys may appear in any order and in any case on input; output
//! always uses the order above. LF and CRLF line endings are accepted.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::Generator;
use crate::Width;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty")]
    EmptySource,
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("bad text header: {0}")]
    BadHeader(String),
    #[error("line {line}: value {value} does not fit in {numbit} bits")]
    ValueOutOfRange {
        line: usize,
        value: String,
        numbit: u32,
    },
    #[error("line {line}: '{text}' is not an unsigned decimal integer")]
    BadValue { line: usize, text: String },
    #[error("bad input: {0}")]
    BadInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Pipe,
    BinaryFile,
    TextFile,
    InternalGenerator,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewindPolicy {
    #[default]
    StopWithWarning,
    Rewind,
}

/// Width selection for binary input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WidthMode {
    Fixed(Width),
    /// 64-bit, unless the input is a regular file whose length is a
    /// multiple of 4 but not of 8. This is a heuristic, nothing more.
    Auto,
}

/// Conditions worth telling the user about that do not stop the stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamWarning {
    /// EOF arrived mid-word; the partial word was dropped.
    TruncatedWord { trailing_bytes: usize },
    /// The source ran dry before a request was satisfied.
    Exhausted { words_read: u64 },
    /// The source was re-read from its first word. Tests past this point see
    /// repeated data.
    Rewound { after_words: u64 },
    /// Rewind was requested but the source cannot seek.
    RewindUnsupported,
    /// The text header's count disagrees with the data lines; the data wins.
    CountMismatch { declared: u64, actual: u64 },
}

impl fmt::Display for StreamWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamWarning::TruncatedWord { trailing_bytes } => {
                write!(
                    f,
                    "input ends mid-word; discarded {trailing_bytes} trailing byte(s)"
                )
            }
            StreamWarning::Exhausted { words_read } => {
                write!(f, "input exhausted after {words_read} word(s)")
            }
            StreamWarning::Rewound { after_words } => write!(
                f,
                "input rewound after {after_words} word(s); later tests see repeated data"
            ),
            StreamWarning::RewindUnsupported => {
                write!(
                    f,
                    "rewind requested but the input cannot seek; stopping at end of input"
                )
            }
            StreamWarning::CountMismatch { declared, actual } => write!(
                f,
                "header declares {declared} value(s) but {actual} were found; using {actual}"
            ),
        }
    }
}

/// `type:` / `count:` / `numbit:` header of the text format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TextFileHeader {
    pub type_char: char,
    pub count: u64,
    pub numbit: Width,
}

enum Backend {
    Pipe(BufReader<Box<dyn Read + Send>>),
    File { reader: BufReader<File>, len: u64 },
    Words { words: Vec<u64>, pos: usize },
    Generator(Box<Generator>),
}

/// A sequential, single-consumer reader of fixed-width words.
pub struct WordStream {
    width: Width,
    source: SourceKind,
    budget_bytes: u64,
    rewind_policy: RewindPolicy,
    words_read: u64,
    exhausted: bool,
    rewound: bool,
    warnings: Vec<StreamWarning>,
    backend: Backend,
}

impl fmt::Debug for WordStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WordStream")
            .field("width", &self.width)
            .field("source", &self.source)
            .field("budget_bytes", &self.budget_bytes)
            .field("rewind_policy", &self.rewind_policy)
            .field("words_read", &self.words_read)
            .field("exhausted", &self.exhausted)
            .finish()
    }
}

impl WordStream {
    fn with_backend(width: Width, source: SourceKind, budget_bytes: u64, backend: Backend) -> Self {
        WordStream {
            width,
            source,
            budget_bytes,
            rewind_policy: RewindPolicy::default(),
            words_read: 0,
            exhausted: false,
            rewound: false,
            warnings: Vec::new(),
            backend,
        }
    }

    /// Opens a non-seekable byte source such as standard input. `Auto`
    /// resolves to 64-bit.
    pub fn from_reader<R: Read + Send + 'static>(
        reader: R,
        mode: WidthMode,
        budget_bytes: u64,
    ) -> Result<Self, IngestError> {
        let mut reader =
            BufReader::with_capacity(1 << 16, Box::new(reader) as Box<dyn Read + Send>);
        if reader.fill_buf()?.is_empty() {
            return Err(IngestError::EmptySource);
        }
        let width = match mode {
            WidthMode::Fixed(w) => w,
            WidthMode::Auto => Width::W64,
        };
        Ok(Self::with_backend(
            width,
            SourceKind::Pipe,
            budget_bytes,
            Backend::Pipe(reader),
        ))
    }

    /// Opens a binary file of little-endian words.
    pub fn open_file(path: &Path, mode: WidthMode, budget_bytes: u64) -> Result<Self, IngestError> {
        let file = File::open(path)?;
        let meta = file.metadata()?;
        let len = meta.len();
        if meta.is_file() && len == 0 {
            return Err(IngestError::EmptySource);
        }
        let width = match mode {
            WidthMode::Fixed(w) => w,
            WidthMode::Auto => auto_width(meta.is_file().then_some(len)),
        };
        if !meta.is_file() {
            // FIFOs and character devices behave like pipes
            let mut s = Self::from_reader(file, WidthMode::Fixed(width), budget_bytes)?;
            s.source = SourceKind::BinaryFile;
            return Ok(s);
        }
        Ok(Self::with_backend(
            width,
            SourceKind::BinaryFile,
            budget_bytes,
            Backend::File {
                reader: BufReader::with_capacity(1 << 16, file),
                len,
            },
        ))
    }

    /// A stream drawing from an internal generator; never runs dry on its
    /// own, so `budget_bytes` should be non-zero.
    pub fn from_generator(generator: Generator, width: Width, budget_bytes: u64) -> Self {
        Self::with_backend(
            width,
            SourceKind::InternalGenerator,
            budget_bytes,
            Backend::Generator(Box::new(generator)),
        )
    }

    /// A stream over words already in memory.
    pub fn from_words(words: Vec<u64>, width: Width, source: SourceKind) -> Self {
        Self::with_backend(width, source, 0, Backend::Words { words, pos: 0 })
    }

    pub fn with_budget(mut self, budget_bytes: u64) -> Self {
        self.budget_bytes = budget_bytes;
        self
    }

    pub fn with_rewind_policy(mut self, policy: RewindPolicy) -> Self {
        self.rewind_policy = policy;
        self
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn source(&self) -> SourceKind {
        self.source
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn rewind_policy(&self) -> RewindPolicy {
        self.rewind_policy
    }

    pub fn words_read(&self) -> u64 {
        self.words_read
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn warnings(&self) -> &[StreamWarning] {
        &self.warnings
    }

    fn budget_words(&self) -> Option<u64> {
        (self.budget_bytes > 0).then(|| self.budget_bytes / self.width.bytes() as u64)
    }

    fn can_rewind(&self) -> bool {
        matches!(self.backend, Backend::File { .. } | Backend::Words { .. })
    }

    /// Words this stream can still deliver, if that is known up front.
    pub fn available_words(&self) -> Option<u64> {
        let by_budget = self
            .budget_words()
            .map(|b| b.saturating_sub(self.words_read));
        let rewinding = self.rewind_policy == RewindPolicy::Rewind && self.can_rewind();
        if self.exhausted {
            return Some(0);
        }
        let by_source = match &self.backend {
            _ if rewinding => None,
            Backend::File { len, .. } => {
                Some((len / self.width.bytes() as u64).saturating_sub(self.words_read))
            }
            Backend::Words { words, pos } => Some((words.len() - pos) as u64),
            Backend::Pipe(_) | Backend::Generator(_) => None,
        };
        match (by_budget, by_source) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Reads up to `n` words in source order.
    ///
    /// The result is shorter than `n` when the budget is reached or the
    /// source runs dry; the stream is then marked exhausted. With
    /// [`RewindPolicy::Rewind`] a seekable source restarts from its first
    /// word instead, and a [`StreamWarning::Rewound`] is recorded once.
    pub fn next_words(&mut self, n: usize) -> Result<Vec<u64>, IngestError> {
        let mut out = Vec::with_capacity(n.min(1 << 24));
        if n == 0 || self.exhausted {
            return Ok(out);
        }
        let mut want = n as u64;
        if let Some(b) = self.budget_words() {
            let left = b.saturating_sub(self.words_read);
            if left < want {
                want = left;
            }
        }
        while (out.len() as u64) < want {
            let before = out.len();
            let need = (want - before as u64) as usize;
            let hit_eof = self.read_backend(need, &mut out)?;
            self.words_read += (out.len() - before) as u64;
            if !hit_eof {
                continue;
            }
            let progressed = out.len() > before || self.words_read > 0;
            if self.rewind_policy == RewindPolicy::Rewind && progressed {
                if self.can_rewind() {
                    self.rewind()?;
                    if !self.rewound {
                        self.rewound = true;
                        self.warnings.push(StreamWarning::Rewound {
                            after_words: self.words_read,
                        });
                    }
                    continue;
                }
                if !self.warnings.contains(&StreamWarning::RewindUnsupported) {
                    self.warnings.push(StreamWarning::RewindUnsupported);
                }
            }
            self.exhausted = true;
            self.warnings.push(StreamWarning::Exhausted {
                words_read: self.words_read,
            });
            return Ok(out);
        }
        if self.budget_words() == Some(self.words_read) && (out.len() as u64) < n as u64 {
            self.exhausted = true;
        }
        Ok(out)
    }

    fn rewind(&mut self) -> Result<(), IngestError> {
        match &mut self.backend {
            Backend::File { reader, .. } => {
                reader.seek(SeekFrom::Start(0))?;
            }
            Backend::Words { pos, .. } => *pos = 0,
            Backend::Pipe(_) | Backend::Generator(_) => {}
        }
        Ok(())
    }

    /// Appends up to `need` words; returns true on end of input.
    fn read_backend(&mut self, need: usize, out: &mut Vec<u64>) -> Result<bool, IngestError> {
        let width = self.width;
        match &mut self.backend {
            Backend::Generator(g) => {
                out.extend((0..need).map(|_| g.next_word(width)));
                Ok(false)
            }
            Backend::Words { words, pos } => {
                let take = need.min(words.len() - *pos);
                out.extend_from_slice(&words[*pos..*pos + take]);
                *pos += take;
                Ok(take < need)
            }
            Backend::Pipe(r) => read_words(r, width, need, out, &mut self.warnings),
            Backend::File { reader, .. } => {
                read_words(reader, width, need, out, &mut self.warnings)
            }
        }
    }
}

fn auto_width(regular_file_len: Option<u64>) -> Width {
    match regular_file_len {
        Some(len) if len % 4 == 0 && len % 8 != 0 => Width::W32,
        _ => Width::W64,
    }
}

fn read_words<R: Read>(
    reader: &mut R,
    width: Width,
    need: usize,
    out: &mut Vec<u64>,
    warnings: &mut Vec<StreamWarning>,
) -> Result<bool, IngestError> {
    const CHUNK_WORDS: usize = 1 << 14;
    let wb = width.bytes();
    let mut buf = vec![0u8; CHUNK_WORDS.min(need) * wb];
    let mut remaining = need;
    while remaining > 0 {
        let chunk = remaining.min(CHUNK_WORDS) * wb;
        let got = fill(reader, &mut buf[..chunk])?;
        let whole = got / wb;
        match width {
            Width::W32 => out.extend(
                buf[..whole * 4]
                    .chunks_exact(4)
                    .map(|c| u64::from(u32::from_le_bytes(c.try_into().unwrap()))),
            ),
            Width::W64 => out.extend(
                buf[..whole * 8]
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap())),
            ),
        }
        remaining -= whole;
        if got < chunk {
            let truncated = StreamWarning::TruncatedWord {
                trailing_bytes: got % wb,
            };
            if got % wb != 0 && !warnings.contains(&truncated) {
                warnings.push(truncated);
            }
            return Ok(true);
        }
    }
    Ok(false)
}

/// Reads until `buf` is full or EOF; returns the byte count.
fn fill<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Parses the text format into its header and a stream of the data words.
pub fn parse_text<R: BufRead>(source: R) -> Result<(TextFileHeader, WordStream), IngestError> {
    let mut type_char: Option<char> = None;
    let mut count: Option<u64> = None;
    let mut numbit: Option<Width> = None;
    let mut header_lines = 0;
    let mut words = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if header_lines < 3 {
            header_lines += 1;
            let (key, value) = text.split_once(':').ok_or_else(|| {
                IngestError::BadHeader(format!(
                    "line {lineno}: expected 'key: value', got '{text}'"
                ))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let duplicate =
                || IngestError::BadHeader(format!("line {lineno}: duplicate key '{key}'"));
            match key.as_str() {
                "type" => {
                    if type_char.is_some() {
                        return Err(duplicate());
                    }
                    if value != "d" {
                        return Err(IngestError::BadHeader(format!(
                            "line {lineno}: unsupported type '{value}' (only 'd')"
                        )));
                    }
                    type_char = Some('d');
                }
                "count" => {
                    if count.is_some() {
                        return Err(duplicate());
                    }
                    let c: u64 = value.parse().map_err(|_| {
                        IngestError::BadHeader(format!("line {lineno}: bad count '{value}'"))
                    })?;
                    if c == 0 {
                        return Err(IngestError::BadHeader("count must be at least 1".into()));
                    }
                    count = Some(c);
                }
                "numbit" => {
                    if numbit.is_some() {
                        return Err(duplicate());
                    }
                    let w = value
                        .parse()
                        .ok()
                        .and_then(Width::from_bits)
                        .ok_or_else(|| {
                            IngestError::BadHeader(format!(
                                "line {lineno}: numbit must be 32 or 64, got '{value}'"
                            ))
                        })?;
                    numbit = Some(w);
                }
                _ => {
                    return Err(IngestError::BadHeader(format!(
                        "line {lineno}: unknown key '{key}'"
                    )))
                }
            }
            continue;
        }
        let width = numbit.expect("header complete");
        words.push(parse_word(text, lineno, width)?);
    }

    let (Some(type_char), Some(count), Some(numbit)) = (type_char, count, numbit) else {
        return Err(IngestError::BadHeader(
            "header must define type, count and numbit".into(),
        ));
    };
    let header = TextFileHeader {
        type_char,
        count,
        numbit,
    };
    let actual = words.len() as u64;
    let mut stream = WordStream::from_words(words, numbit, SourceKind::TextFile);
    if actual != count {
        stream.warnings.push(StreamWarning::CountMismatch {
            declared: count,
            actual,
        });
    }
    Ok((header, stream))
}

fn parse_word(text: &str, line: usize, width: Width) -> Result<u64, IngestError> {
    if !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(IngestError::BadValue {
            line,
            text: text.to_string(),
        });
    }
    let out_of_range = || IngestError::ValueOutOfRange {
        line,
        value: text.to_string(),
        numbit: width.bits(),
    };
    let v: u64 = text.parse().map_err(|_| out_of_range())?;
    if v > width.max_value() {
        return Err(out_of_range());
    }
    Ok(v)
}

/// Writes `words` in the text format; returns the number of values written.
pub fn write_text<W: Write + ?Sized>(
    words: &[u64],
    numbit: Width,
    sink: &mut W,
) -> Result<u64, IngestError> {
    if words.is_empty() {
        return Err(IngestError::BadInput(
            "cannot write an empty word list (count must be >= 1)".into(),
        ));
    }
    if let Some((i, v)) = words
        .iter()
        .enumerate()
        .find(|(_, &v)| v > numbit.max_value())
    {
        return Err(IngestError::ValueOutOfRange {
            line: 4 + i,
            value: v.to_string(),
            numbit: numbit.bits(),
        });
    }
    let mut out = io::BufWriter::new(sink);
    writeln!(out, "type: d")?;
    writeln!(out, "count: {}", words.len())?;
    writeln!(out, "numbit: {}", numbit.bits())?;
    for w in words {
        writeln!(out, "{w}")?;
    }
    out.flush()?;
    Ok(words.len() as u64)
}
