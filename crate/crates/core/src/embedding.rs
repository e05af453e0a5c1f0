//! Embedding matrices and their interchange formats.
//!
//! Two on-disk formats are supported:
//!
//! * text — header line `"V D"`, then `V` lines `"token v1 … vD"`,
//!   single-space separated, UTF-8;
//! * binary — text header `"V D\n"`, then per token: the token bytes
//!   terminated by a space, followed by `D` little-endian 32-bit floats and
//!   an optional trailing newline.
//!
//! Values are held as 64-bit floats internally; the binary format exchanges
//! 32-bit values, so a binary round trip is bit-exact at 32-bit width.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Longest token accepted by the binary loader before the file is deemed
/// corrupt (a missing space terminator swallows the float payload).
const MAX_BINARY_TOKEN_BYTES: usize = 10_000;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Binary { path: String, msg: String },
    #[error("invalid embedding matrix: {0}")]
    Invalid(String),
    #[error("token {token:?} contains whitespace and cannot be written")]
    UnwritableToken { token: String },
    #[error("vocabulary intersection is empty")]
    EmptyIntersection,
    #[error("cannot infer vector format from extension of {path:?}; pass the format explicitly")]
    UnknownFormat { path: String },
}

/// On-disk vector format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Text,
    Binary,
}

impl VectorFormat {
    /// Guess the format from a file extension: `.txt`/`.vec` are text,
    /// `.bin` is binary.
    pub fn sniff(path: &Path) -> Option<VectorFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => Some(VectorFormat::Text),
            Some("bin") => Some(VectorFormat::Binary),
            _ => None,
        }
    }
}

impl std::str::FromStr for VectorFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(VectorFormat::Text),
            "binary" => Ok(VectorFormat::Binary),
            other => Err(format!("unknown format {other:?}, expected text|binary")),
        }
    }
}

/// A vocabulary of unique tokens paired with one dense row per token.
///
/// Immutable after construction; the token→row lookup is a bijection onto
/// `[0, V)` and every entry is finite.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
    source_tag: String,
}

impl EmbeddingMatrix {
    /// Builds a matrix, validating all invariants: at least one row and one
    /// column, row count matching the token list, unique tokens, and finite
    /// values throughout.
    pub fn new(
        tokens: Vec<String>,
        vectors: Array2<f64>,
        source_tag: impl Into<String>,
    ) -> Result<Self, EmbeddingError> {
        if tokens.is_empty() {
            return Err(EmbeddingError::Invalid("vocabulary is empty (V >= 1 required)".into()));
        }
        if vectors.ncols() == 0 {
            return Err(EmbeddingError::Invalid("dimension is zero (D >= 1 required)".into()));
        }
        if vectors.nrows() != tokens.len() {
            return Err(EmbeddingError::Invalid(format!(
                "token count {} does not match row count {}",
                tokens.len(),
                vectors.nrows()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(EmbeddingError::Invalid(format!("duplicate token {tok:?}")));
            }
        }
        if let Some(v) = vectors.iter().find(|v| !v.is_finite()) {
            return Err(EmbeddingError::Invalid(format!("non-finite value {v}")));
        }
        Ok(Self { tokens, index, vectors, source_tag: source_tag.into() })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn row_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn row(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.row_index(token).map(|i| self.vectors.row(i))
    }

    /// Restricts the matrix to tokens present in `keep`, preserving the
    /// original row order. Errors if nothing survives.
    pub fn intersect(&self, keep: &HashSet<String>) -> Result<EmbeddingMatrix, EmbeddingError> {
        let rows: Vec<usize> = (0..self.tokens.len())
            .filter(|&i| keep.contains(&self.tokens[i]))
            .collect();
        if rows.is_empty() {
            return Err(EmbeddingError::EmptyIntersection);
        }
        let tokens = rows.iter().map(|&i| self.tokens[i].clone()).collect();
        let vectors = self.vectors.select(ndarray::Axis(0), &rows);
        EmbeddingMatrix::new(tokens, vectors, self.source_tag.clone())
    }

    /// Loads a matrix, picking the format from `format` or, when absent,
    /// from the file extension.
    pub fn load(path: &Path, format: Option<VectorFormat>) -> Result<Self, EmbeddingError> {
        let fmt = format.or_else(|| VectorFormat::sniff(path)).ok_or_else(|| {
            EmbeddingError::UnknownFormat { path: path.display().to_string() }
        })?;
        match fmt {
            VectorFormat::Text => Self::load_text(path),
            VectorFormat::Binary => Self::load_binary(path),
        }
    }

    /// Writes a matrix, picking the format like [`EmbeddingMatrix::load`].
    /// `precision` only applies to the text format.
    pub fn write(
        &self,
        path: &Path,
        format: Option<VectorFormat>,
        precision: usize,
    ) -> Result<(), EmbeddingError> {
        let fmt = format.or_else(|| VectorFormat::sniff(path)).ok_or_else(|| {
            EmbeddingError::UnknownFormat { path: path.display().to_string() }
        })?;
        match fmt {
            VectorFormat::Text => self.write_text(path, precision),
            VectorFormat::Binary => self.write_binary(path),
        }
    }

    /// Parses the text format. Every malformed input is reported with its
    /// 1-based line number.
    pub fn load_text(path: &Path) -> Result<Self, EmbeddingError> {
        let display = path.display().to_string();
        let content = fs::read_to_string(path)
            .map_err(|source| EmbeddingError::Io { path: display.clone(), source })?;
        let parse_err = |line: usize, msg: String| EmbeddingError::Parse {
            path: display.clone(),
            line,
            msg,
        };

        let mut lines = content.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let (v, d) = parse_header(header).map_err(|msg| parse_err(1, msg))?;

        let mut tokens = Vec::with_capacity(v);
        let mut data = Vec::with_capacity(v * d);
        let mut seen: HashSet<&str> = HashSet::with_capacity(v);
        let mut rows = 0usize;
        for (off, line) in lines.enumerate() {
            let lineno = off + 2;
            if rows == v {
                return Err(parse_err(lineno, format!("expected {v} rows, found more")));
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or("");
            if token.is_empty() {
                return Err(parse_err(lineno, "empty token".into()));
            }
            if !seen.insert(token) {
                return Err(parse_err(lineno, format!("duplicate token {token:?}")));
            }
            let mut count = 0usize;
            for field in fields {
                let value: f64 = field
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("non-numeric field {field:?}")))?;
                if !value.is_finite() {
                    return Err(parse_err(lineno, format!("non-finite value {field:?}")));
                }
                data.push(value);
                count += 1;
            }
            if count != d {
                return Err(parse_err(lineno, format!("expected {d} values, found {count}")));
            }
            tokens.push(token.to_string());
            rows += 1;
        }
        if rows != v {
            return Err(parse_err(rows + 1, format!("expected {v} rows, found {rows}")));
        }
        // `seen` borrows `content`; drop it before moving tokens.
        drop(seen);
        let vectors = Array2::from_shape_vec((v, d), data)
            .expect("row-major buffer matches declared shape");
        EmbeddingMatrix::new(tokens, vectors, format!("text:{display}"))
    }

    /// Parses the binary format.
    pub fn load_binary(path: &Path) -> Result<Self, EmbeddingError> {
        let display = path.display().to_string();
        let bytes = fs::read(path)
            .map_err(|source| EmbeddingError::Io { path: display.clone(), source })?;
        let bin_err =
            |msg: String| EmbeddingError::Binary { path: display.clone(), msg };

        let header_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bin_err("missing header".into()))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| bin_err("header is not UTF-8".into()))?;
        let (v, d) = parse_header(header).map_err(bin_err)?;

        let mut pos = header_end + 1;
        let mut tokens = Vec::with_capacity(v);
        let mut data = Vec::with_capacity(v * d);
        for rec in 0..v {
            // A writer may terminate the previous record with a newline.
            if pos < bytes.len() && bytes[pos] == b'\n' {
                pos += 1;
            }
            let token_start = pos;
            loop {
                if pos >= bytes.len() {
                    return Err(bin_err(format!(
                        "truncated file: token {} of {} is unterminated",
                        rec + 1,
                        v
                    )));
                }
                if bytes[pos] == b' ' {
                    break;
                }
                if pos - token_start > MAX_BINARY_TOKEN_BYTES {
                    return Err(bin_err(format!(
                        "token {} of {} exceeds {} bytes; file is corrupt",
                        rec + 1,
                        v,
                        MAX_BINARY_TOKEN_BYTES
                    )));
                }
                pos += 1;
            }
            let token = std::str::from_utf8(&bytes[token_start..pos])
                .map_err(|_| bin_err(format!("token {} of {} is not UTF-8", rec + 1, v)))?;
            pos += 1; // space terminator
            let payload = d * 4;
            if pos + payload > bytes.len() {
                return Err(bin_err(format!(
                    "truncated file: vector {} of {} needs {} bytes, {} left",
                    rec + 1,
                    v,
                    payload,
                    bytes.len() - pos
                )));
            }
            for j in 0..d {
                let at = pos + j * 4;
                let raw: [u8; 4] = bytes[at..at + 4].try_into().expect("bounds checked");
                let value = f32::from_le_bytes(raw);
                if !value.is_finite() {
                    return Err(bin_err(format!(
                        "non-finite value in vector {} of {}",
                        rec + 1,
                        v
                    )));
                }
                data.push(f64::from(value));
            }
            pos += payload;
            tokens.push(token.to_string());
        }
        if pos < bytes.len() && bytes[pos] == b'\n' {
            pos += 1;
        }
        if pos != bytes.len() {
            return Err(bin_err(format!("{} trailing bytes after last record", bytes.len() - pos)));
        }
        let vectors = Array2::from_shape_vec((v, d), data)
            .expect("row-major buffer matches declared shape");
        EmbeddingMatrix::new(tokens, vectors, format!("binary:{display}"))
    }

    /// Writes the text format with `precision` decimal digits per value.
    ///
    /// `precision >= 17` switches to the shortest representation that parses
    /// back to the exact same 64-bit value.
    pub fn write_text(&self, path: &Path, precision: usize) -> Result<(), EmbeddingError> {
        self.check_writable_tokens()?;
        let display = path.display().to_string();
        let io_err = |source| EmbeddingError::Io { path: display.clone(), source };
        let file = fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let emit = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            writeln!(w, "{} {}", self.vocab_size(), self.dim())?;
            for (token, row) in self.tokens.iter().zip(self.vectors.rows()) {
                write!(w, "{token}")?;
                for value in row {
                    if precision >= 17 {
                        write!(w, " {value}")?;
                    } else {
                        write!(w, " {value:.precision$}")?;
                    }
                }
                writeln!(w)?;
            }
            w.flush()
        };
        emit(&mut w).map_err(io_err)
    }

    /// Writes the binary format (values narrowed to 32-bit).
    pub fn write_binary(&self, path: &Path) -> Result<(), EmbeddingError> {
        self.check_writable_tokens()?;
        let display = path.display().to_string();
        let io_err = |source| EmbeddingError::Io { path: display.clone(), source };
        let file = fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let emit = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            write!(w, "{} {}\n", self.vocab_size(), self.dim())?;
            for (token, row) in self.tokens.iter().zip(self.vectors.rows()) {
                w.write_all(token.as_bytes())?;
                w.write_all(b" ")?;
                for value in row {
                    w.write_all(&(*value as f32).to_le_bytes())?;
                }
                w.write_all(b"\n")?;
            }
            w.flush()
        };
        emit(&mut w).map_err(io_err)
    }

    fn check_writable_tokens(&self) -> Result<(), EmbeddingError> {
        for token in &self.tokens {
            if token.chars().any(char::is_whitespace) {
                return Err(EmbeddingError::UnwritableToken { token: token.clone() });
            }
        }
        Ok(())
    }
}

fn parse_header(header: &str) -> Result<(usize, usize), String> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(format!("header must be \"V D\", got {header:?}"));
    }
    let v: usize = fields[0].parse().map_err(|_| format!("invalid V {:?}", fields[0]))?;
    let d: usize = fields[1].parse().map_err(|_| format!("invalid D {:?}", fields[1]))?;
    if v == 0 || d == 0 {
        return Err(format!("V and D must be >= 1, got {v} {d}"));
    }
    Ok((v, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write as _;

    fn matrix(tokens: &[&str], rows: Vec<Vec<f64>>) -> EmbeddingMatrix {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let vectors = Array2::from_shape_vec((tokens.len(), d), flat).unwrap();
        EmbeddingMatrix::new(tokens.iter().map(|s| s.to_string()).collect(), vectors, "test")
            .unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".txt").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_text_two_by_three() {
        let f = write_tmp("2 3\na 1 0 0\nb 0 1 0\n");
        let m = EmbeddingMatrix::load_text(f.path()).unwrap();
        assert_eq!(m.vocab_size(), 2);
        assert_eq!(m.dim(), 3);
        assert_eq!(m.row("a").unwrap().to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(m.row("b").unwrap().to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn load_text_minimal() {
        let f = write_tmp("1 1\nx 0.5\n");
        let m = EmbeddingMatrix::load_text(f.path()).unwrap();
        assert_eq!((m.vocab_size(), m.dim()), (1, 1));
        assert_eq!(m.row("x").unwrap()[0], 0.5);
    }

    #[test]
    fn load_text_row_count_mismatch() {
        let f = write_tmp("3 2\na 1 2\nb 3 4\n");
        let err = EmbeddingMatrix::load_text(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 3 rows, found 2"), "{msg}");
    }

    #[test]
    fn load_text_reports_line_numbers() {
        let f = write_tmp("2 2\na 1 2\nb x 4\n");
        let msg = EmbeddingMatrix::load_text(f.path()).unwrap_err().to_string();
        assert!(msg.contains(":3:"), "{msg}");
        assert!(msg.contains("non-numeric"), "{msg}");
    }

    #[test]
    fn load_text_rejects_duplicates_and_nonfinite() {
        let f = write_tmp("2 1\na 1\na 2\n");
        let msg = EmbeddingMatrix::load_text(f.path()).unwrap_err().to_string();
        assert!(msg.contains("duplicate token"), "{msg}");

        let f = write_tmp("1 1\na inf\n");
        let msg = EmbeddingMatrix::load_text(f.path()).unwrap_err().to_string();
        assert!(msg.contains("non-finite"), "{msg}");

        let f = write_tmp("1 1\na NaN\n");
        let msg = EmbeddingMatrix::load_text(f.path()).unwrap_err().to_string();
        assert!(msg.contains("non-finite"), "{msg}");
    }

    #[test]
    fn load_text_wrong_field_count() {
        let f = write_tmp("1 3\na 1 2\n");
        let msg = EmbeddingMatrix::load_text(f.path()).unwrap_err().to_string();
        assert!(msg.contains("expected 3 values, found 2"), "{msg}");
    }

    #[test]
    fn text_round_trip_precision() {
        let m = matrix(&["a", "b"], vec![vec![0.123456789, -1.5], vec![2.25, 1e-3]]);
        let f = tempfile::Builder::new().suffix(".txt").tempfile().unwrap();
        m.write_text(f.path(), 6).unwrap();
        let back = EmbeddingMatrix::load_text(f.path()).unwrap();
        for (x, y) in m.vectors().iter().zip(back.vectors().iter()) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn text_round_trip_precision_17_is_exact() {
        let m = matrix(
            &["a", "b"],
            vec![vec![0.1 + 0.2, -1.0 / 3.0], vec![f64::MIN_POSITIVE, 12345.6789012345678]],
        );
        let f = tempfile::Builder::new().suffix(".txt").tempfile().unwrap();
        m.write_text(f.path(), 17).unwrap();
        let back = EmbeddingMatrix::load_text(f.path()).unwrap();
        for (x, y) in m.vectors().iter().zip(back.vectors().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn binary_round_trip_is_exact_at_32_bits() {
        let m = matrix(&["a", "čau"], vec![vec![1.0, 2.5], vec![-0.125, 3.0e-7]]);
        let f = tempfile::Builder::new().suffix(".bin").tempfile().unwrap();
        m.write_binary(f.path()).unwrap();
        let back = EmbeddingMatrix::load_binary(f.path()).unwrap();
        assert_eq!(back.tokens(), m.tokens());
        for (x, y) in m.vectors().iter().zip(back.vectors().iter()) {
            assert_eq!((*x as f32).to_bits(), (*y as f32).to_bits());
            assert_eq!(*y, f64::from(*x as f32));
        }
    }

    #[test]
    fn binary_empty_file_is_missing_header() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let msg = EmbeddingMatrix::load_binary(f.path()).unwrap_err().to_string();
        assert!(msg.contains("missing header"), "{msg}");
    }

    #[test]
    fn binary_direct_layout() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"1 2\na ").unwrap();
        f.write_all(&1.0f32.to_le_bytes()).unwrap();
        f.write_all(&2.0f32.to_le_bytes()).unwrap();
        f.flush().unwrap();
        let m = EmbeddingMatrix::load_binary(f.path()).unwrap();
        assert_eq!(m.row("a").unwrap().to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn binary_truncated_payload() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"1 2\na ").unwrap();
        f.write_all(&1.0f32.to_le_bytes()).unwrap();
        f.flush().unwrap();
        let msg = EmbeddingMatrix::load_binary(f.path()).unwrap_err().to_string();
        assert!(msg.contains("truncated"), "{msg}");
    }

    #[test]
    fn binary_oversized_token_is_corrupt() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"1 1\n").unwrap();
        f.write_all(&vec![b'x'; MAX_BINARY_TOKEN_BYTES + 2]).unwrap();
        f.flush().unwrap();
        let msg = EmbeddingMatrix::load_binary(f.path()).unwrap_err().to_string();
        assert!(msg.contains("corrupt"), "{msg}");
    }

    #[test]
    fn empty_matrix_rejected_at_construction() {
        let err =
            EmbeddingMatrix::new(vec![], Array2::zeros((0, 3)), "t").unwrap_err().to_string();
        assert!(err.contains("V >= 1"), "{err}");
    }

    #[test]
    fn tokens_with_spaces_rejected_at_write() {
        let m = EmbeddingMatrix::new(vec!["a b".into()], array![[1.0_f64]], "t").unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        let err = m.write_text(f.path(), 6).unwrap_err();
        assert!(matches!(err, EmbeddingError::UnwritableToken { .. }));
        let err = m.write_binary(f.path()).unwrap_err();
        assert!(matches!(err, EmbeddingError::UnwritableToken { .. }));
    }

    #[test]
    fn intersect_keeps_order_and_is_idempotent() {
        let m = matrix(&["a", "b", "c"], vec![vec![1.0], vec![2.0], vec![3.0]]);
        let keep: HashSet<String> = ["b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let cut = m.intersect(&keep).unwrap();
        assert_eq!(cut.tokens(), &["b".to_string(), "c".to_string()]);
        assert_eq!(cut.vectors().column(0).to_vec(), vec![2.0, 3.0]);

        let again = cut.intersect(&keep).unwrap();
        assert_eq!(again.tokens(), cut.tokens());
        assert_eq!(again.vectors(), cut.vectors());
    }

    #[test]
    fn intersect_with_full_vocab_is_identity() {
        let m = matrix(&["a", "b"], vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let keep: HashSet<String> = m.tokens().iter().cloned().collect();
        let same = m.intersect(&keep).unwrap();
        assert_eq!(same.tokens(), m.tokens());
        assert_eq!(same.vectors(), m.vectors());
    }

    #[test]
    fn intersect_empty_is_error() {
        let m = matrix(&["a"], vec![vec![1.0]]);
        let keep: HashSet<String> = ["z".to_string()].into_iter().collect();
        assert!(matches!(m.intersect(&keep), Err(EmbeddingError::EmptyIntersection)));
    }

    #[test]
    fn format_sniffing() {
        assert_eq!(VectorFormat::sniff(Path::new("m.vec")), Some(VectorFormat::Text));
        assert_eq!(VectorFormat::sniff(Path::new("m.txt")), Some(VectorFormat::Text));
        assert_eq!(VectorFormat::sniff(Path::new("m.bin")), Some(VectorFormat::Binary));
        assert_eq!(VectorFormat::sniff(Path::new("m.npz")), None);
    }
}
