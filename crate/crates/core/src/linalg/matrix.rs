use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating symmetry of matrices read from text.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dense symmetric `p x p` matrix.
///
/// Storage is full row-major; every mutator writes both `(i, j)` and `(j, i)`
/// so `get(i, j) == get(j, i)` holds exactly.
/// Serialises as a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl From<SymmetricMatrix> for Vec<Vec<f64>> {
    fn from(m: SymmetricMatrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymmetricMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows, SYMMETRY_TOL)
    }
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from full rows, checking squareness and symmetry to
    /// `tol` and averaging the two triangles.
    pub fn from_rows(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix has no rows".into()));
        }
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
            }
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                m.set(i, j, 0.5 * (a + b));
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    /// Adds `delta` to entry `(i, j)` and its mirror (once on the diagonal).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, delta: f64) {
        self.data[i * self.dim + j] += delta;
        if i != j {
            self.data[j * self.dim + i] += delta;
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// `tr(self * other)`, which for symmetric arguments is the entrywise inner product.
    pub fn trace_product(&self, other: &SymmetricMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(indices.len(), |a, b| self.get(indices[a], indices[b]))
    }

    /// General (non-symmetric) product `self * other`, row-major.
    pub fn mul_dense(&self, other: &SymmetricMatrix) -> Vec<f64> {
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            let a = self.row(i);
            let dst = &mut out[i * p..(i + 1) * p];
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += aik * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                best = best.max(self.get(i, j).abs());
            }
        }
        best
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = read_csv_rows(reader)?;
        Self::from_rows(&rows, SYMMETRY_TOL)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_csv_rows(writer, self.dim, &self.data)
    }
}

/// `max_ij |(a b - I)_ij|`.
pub fn identity_residual(a: &SymmetricMatrix, b: &SymmetricMatrix) -> f64 {
    let p = a.dim();
    a.mul_dense(b)
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let target = if idx / p == idx % p { 1.0 } else { 0.0 };
            (v - target).abs()
        })
        .fold(0.0, f64::max)
}

/// `max_ij |a_ij - b_ij|`.
pub fn sup_norm_deviation(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Reads a header-less numeric CSV into rows of equal length.
pub fn read_csv_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number {field:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    actual: row.len(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn write_csv_rows<W: Write>(writer: W, ncols: usize, data: &[f64]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in data.chunks(ncols) {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
