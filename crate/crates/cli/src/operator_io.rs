//! Learned-operator files.
//!
//! The first line is `n k colmajor`, followed by the `n·k` entries of
//! `X = Ωᵀ` in column-major order (atom after atom). The text variant writes
//! one value per line with round-trip precision. The binary variant appends
//! ` f64le` to the header line and stores raw little-endian doubles after it.

use std::path::Path;

use ndarray::Array2;

use crate::config::OperatorFormat;
use crate::error::{CliError, CliResult};

const LAYOUT: &str = "colmajor";
const BINARY_TAG: &str = "f64le";

pub fn encode(x: &Array2<f64>, format: OperatorFormat) -> Vec<u8> {
    let (n, k) = x.dim();
    let columns = (0..k).flat_map(|j| (0..n).map(move |i| (i, j)));
    match format {
        OperatorFormat::Text => {
            let mut out = format!("{n} {k} {LAYOUT}\n");
            for (i, j) in columns {
                out.push_str(&format!("{:?}\n", x[[i, j]]));
            }
            out.into_bytes()
        }
        OperatorFormat::Binary => {
            let mut out = format!("{n} {k} {LAYOUT} {BINARY_TAG}\n").into_bytes();
            for (i, j) in columns {
                out.extend_from_slice(&x[[i, j]].to_le_bytes());
            }
            out
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<Array2<f64>, String> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing header line")?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not UTF-8")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, k, binary) = match fields.as_slice() {
        [n, k, LAYOUT] => (n, k, false),
        [n, k, LAYOUT, BINARY_TAG] => (n, k, true),
        _ => return Err(format!("unrecognized header {header:?}")),
    };
    let n: usize = n.parse().map_err(|_| format!("bad n in header {header:?}"))?;
    let k: usize = k.parse().map_err(|_| format!("bad k in header {header:?}"))?;
    let body = &bytes[nl + 1..];
    let values: Vec<f64> = if binary {
        if body.len() != 8 * n * k {
            return Err(format!("expected {} bytes of data, found {}", 8 * n * k, body.len()));
        }
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect()
    } else {
        let text = std::str::from_utf8(body).map_err(|_| "body is not UTF-8")?;
        let vals = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format!("bad value {t:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != n * k {
            return Err(format!("expected {} values, found {}", n * k, vals.len()));
        }
        vals
    };
    Ok(Array2::from_shape_fn((n, k), |(i, j)| values[j * n + i]))
}

pub fn write_operator(path: &Path, x: &Array2<f64>, format: OperatorFormat) -> CliResult<()> {
    std::fs::write(path, encode(x, format)).map_err(|e| CliError::io(path, e))
}

pub fn read_operator(path: &Path) -> CliResult<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|m| CliError::format(path, m))
}

/// File name used for each format.
pub fn file_name(format: OperatorFormat) -> &'static str {
    match format {
        OperatorFormat::Text => "operator.txt",
        OperatorFormat::Binary => "operator.bin",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Array2<f64> {
        Array2::from_shape_fn((3, 5), |(i, j)| ((i * 5 + j) as f64).sin() / 3.0 + 1e-17 * j as f64)
    }

    #[test]
    fn both_formats_round_trip_exactly() {
        let x = sample();
        for fmt in [OperatorFormat::Text, OperatorFormat::Binary] {
            assert_eq!(decode(&encode(&x, fmt)).unwrap(), x);
        }
    }

    #[test]
    fn text_layout_is_column_major() {
        let x = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let text = String::from_utf8(encode(&x, OperatorFormat::Text)).unwrap();
        assert_eq!(text, "2 2 colmajor\n1.0\n3.0\n2.0\n4.0\n");
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(decode(b"2 2 rowmajor\n1 2 3 4\n").is_err());
        assert!(decode(b"2 2 colmajor\n1 2 3\n").is_err());
        assert!(decode(b"2 2 colmajor f64le\n1234").is_err());
        assert!(decode(b"").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("op.bin");
        write_operator(&p, &sample(), OperatorFormat::Binary).unwrap();
        assert_eq!(read_operator(&p).unwrap(), sample());
    }
}
