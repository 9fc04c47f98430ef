//! Versioned text checkpoints: a header line `mlpv1 <d> <h1> ... <C>` followed
//! by one decimal float per parameter, 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::MlpModel;
use crate::numkit::Scalar;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "mlpv1";

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_checkpoint<T: Scalar, W: Write>(model: &MlpModel<T>, mut out: W) -> Result<()> {
    let mut text = String::with_capacity(24 * model.num_params() + 64);
    text.push_str(CHECKPOINT_MAGIC);
    for d in model.dims() {
        write!(text, " {d}").expect("writing to a String");
    }
    text.push('\n');
    for p in model.params() {
        writeln!(text, "{:.16e}", p.as_f64()).expect("writing to a String");
    }
    out.write_all(text.as_bytes()).map_err(io_err)
}

pub fn read_checkpoint<T: Scalar, R: Read>(input: R) -> Result<MlpModel<T>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))?
        .map_err(io_err)?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Checkpoint(format!("expected '{CHECKPOINT_MAGIC}' header, found '{header}'")));
    }
    let dims = fields
        .map(|f| f.parse::<usize>().map_err(|e| Error::Checkpoint(format!("bad layer size '{f}': {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut params = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| Error::Checkpoint(format!("bad parameter on line {}: {e}", n + 2)))?;
        params.push(T::lit(v));
    }
    MlpModel::from_params(&dims, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint<T: Scalar>(model: &MlpModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path.as_ref()).map_err(io_err)?;
    write_checkpoint(model, std::io::BufWriter::new(file))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<MlpModel<T>> {
    let file = fs::File::open(path.as_ref())
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
    read_checkpoint(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::SeededRng;

    #[test]
    fn bit_exact_round_trip() {
        let mut rng = SeededRng::new(8);
        let m = MlpModel::<f64>::init(&[6, 5, 4, 3], &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mlpv1 6 5 4 3\n"));
        let back: MlpModel<f64> = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.dims(), m.dims());
        for (a, b) in back.params().iter().zip(m.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_checkpoint::<f64, _>(&b"mlpv2 2 2\n"[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"mlpv1 2 2\n1.0\n"[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"mlpv1 1 1\n1.0\nabc\n"[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b""[..]).is_err());
    }
}
