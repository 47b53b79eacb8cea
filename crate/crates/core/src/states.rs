//! Initial three-qubit states: GHZ, W, or a user-supplied density matrix.
//!
//! Custom matrices are read from plain text: 8 rows of 8 whitespace-separated
//! complex entries, each written `re+imj` (for example `0.5+0j` or
//! `-0.25-1e-3j`). Blank lines and lines starting with `#` are ignored.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::qop::{ComplexMatrix, DensityMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Ghz,
    W,
    Custom(DensityMatrix),
}

impl StateSpec {
    pub fn custom(rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != 8 {
            return Err(Error::CustomState(format!(
                "expected an 8x8 matrix, got {0}x{0}",
                rho.dim()
            )));
        }
        Ok(StateSpec::Custom(rho))
    }

    pub fn label(&self) -> &'static str {
        match self {
            StateSpec::Ghz => "ghz",
            StateSpec::W => "w",
            StateSpec::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn build_state(spec: &StateSpec) -> Result<DensityMatrix> {
    let zero = C64::new(0.0, 0.0);
    match spec {
        StateSpec::Ghz => {
            let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut v = [zero; 8];
            v[0b000] = a;
            v[0b111] = a;
            DensityMatrix::from_pure(&v)
        }
        StateSpec::W => {
            let a = C64::new(1.0 / 3f64.sqrt(), 0.0);
            let mut v = [zero; 8];
            v[0b001] = a;
            v[0b010] = a;
            v[0b100] = a;
            DensityMatrix::from_pure(&v)
        }
        StateSpec::Custom(rho) => {
            if rho.dim() != 8 {
                return Err(Error::CustomState(format!(
                    "expected an 8x8 matrix, got {0}x{0}",
                    rho.dim()
                )));
            }
            DensityMatrix::new(rho.matrix().clone())
        }
    }
}

fn parse_entry(token: &str) -> std::result::Result<C64, String> {
    let body = token
        .strip_suffix('j')
        .ok_or_else(|| format!("`{token}` is not of the form re+imj"))?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| {
            (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
        })
        .ok_or_else(|| format!("`{token}` has no imaginary part"))?;
    let (re, im) = body.split_at(split);
    let re: f64 = re
        .parse()
        .map_err(|_| format!("bad real part `{re}` in `{token}`"))?;
    let im: f64 = im
        .parse()
        .map_err(|_| format!("bad imaginary part `{im}` in `{token}`"))?;
    if !re.is_finite() || !im.is_finite() {
        return Err(format!("non-finite entry `{token}`"));
    }
    Ok(C64::new(re, im))
}

/// Parses the 8×8 text format and validates the result as a density matrix.
pub fn parse_state_text(text: &str) -> Result<DensityMatrix> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if rows.len() != 8 {
        return Err(Error::StateParse {
            row: rows.len().min(8) + 1,
            col: 0,
            msg: format!("expected 8 rows, found {}", rows.len()),
        });
    }
    let mut data = Vec::with_capacity(64);
    for (r, line) in rows.iter().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 8 {
            return Err(Error::StateParse {
                row: r + 1,
                col: tokens.len().min(8) + 1,
                msg: format!("expected 8 entries, found {}", tokens.len()),
            });
        }
        for (c, tok) in tokens.iter().enumerate() {
            let z = parse_entry(tok).map_err(|msg| Error::StateParse {
                row: r + 1,
                col: c + 1,
                msg,
            })?;
            data.push(z);
        }
    }
    let mat = ComplexMatrix::from_rows(8, &data)?;
    DensityMatrix::new(mat).map_err(|e| Error::CustomState(e.to_string()))
}

pub fn load_state_file(path: &Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::CustomState(format!("{}: {e}", path.display())))?;
    parse_state_text(&text)
}

/// Writes a matrix in the same text format [`parse_state_text`] reads.
pub fn format_state_text(rho: &DensityMatrix) -> String {
    let m = rho.matrix();
    let mut out = String::new();
    for r in 0..m.dim() {
        let row: Vec<String> = (0..m.dim())
            .map(|c| {
                let z = m.get(r, c);
                let sign = if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
                    '-'
                } else {
                    '+'
                };
                format!("{:?}{}{:?}j", z.re, sign, z.im.abs())
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
