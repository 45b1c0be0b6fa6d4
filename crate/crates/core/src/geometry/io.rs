//! Columnar field files.
//!
//! Layout: magic `KFLD`, `u32` version, `u32` header length, a JSON header,
//! then `columns × points` little-endian `f64` values, column after column.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::grid::{DiffScheme, GridDomain, GridError, C64};

use super::{ComplexForm, GeometryError, HermitianMetricField};

pub const MAGIC: &[u8; 4] = b"KFLD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// Real scalar field, one column.
    Scalar,
    /// Complex form coefficients; re/im column pairs in basis order.
    Form { p: usize, q: usize },
    /// Metric entries `g_{jk̄}`; re/im column pairs, row-major.
    Metric,
    /// Space-time scalar; one column per time level.
    SpaceTime { time_levels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    pub periods: Vec<f64>,
    pub active_coords: Vec<usize>,
    pub resolution: usize,
    pub scheme: DiffScheme,
    #[serde(flatten)]
    pub kind: FieldKind,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field file (bad magic)")]
    Magic,
    #[error("unsupported field file version {0}")]
    Version(u32),
    #[error("bad header: {0}")]
    Header(String),
    #[error("expected {expected} values, file holds {got}")]
    Truncated { expected: usize, got: usize },
    #[error("field kind mismatch: {0}")]
    Kind(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl FieldHeader {
    pub fn for_domain(domain: &GridDomain, kind: FieldKind, columns: usize) -> Self {
        Self {
            n: domain.n(),
            periods: domain.periods().to_vec(),
            active_coords: domain.active().to_vec(),
            resolution: domain.resolution(),
            scheme: domain.scheme(),
            kind,
            columns,
        }
    }

    pub fn domain(&self) -> Result<GridDomain, GridError> {
        GridDomain::new(self.n, self.periods.clone(), self.resolution, self.active_coords.clone(), self.scheme)
    }
}

fn split_complex(fields: &[Vec<C64>]) -> Vec<Vec<f64>> {
    fields
        .iter()
        .flat_map(|f| [f.iter().map(|v| v.re).collect(), f.iter().map(|v| v.im).collect()])
        .collect()
}

fn join_complex(cols: &[Vec<f64>]) -> Vec<Vec<C64>> {
    cols.chunks(2)
        .map(|c| c[0].iter().zip(&c[1]).map(|(a, b)| C64::new(*a, *b)).collect())
        .collect()
}

impl FieldFile {
    pub fn scalar(domain: &GridDomain, values: &[f64]) -> Self {
        Self { header: FieldHeader::for_domain(domain, FieldKind::Scalar, 1), columns: vec![values.to_vec()] }
    }

    pub fn form(f: &ComplexForm) -> Self {
        let (p, q) = f.bidegree();
        let columns = split_complex(f.coeffs());
        Self { header: FieldHeader::for_domain(f.domain(), FieldKind::Form { p, q }, columns.len()), columns }
    }

    pub fn metric(g: &HermitianMetricField) -> Self {
        let columns = split_complex(g.entries());
        Self { header: FieldHeader::for_domain(g.domain(), FieldKind::Metric, columns.len()), columns }
    }

    /// Time levels as columns.
    pub fn space_time(domain: &GridDomain, levels: &[Vec<f64>]) -> Self {
        let kind = FieldKind::SpaceTime { time_levels: levels.len() };
        Self { header: FieldHeader::for_domain(domain, kind, levels.len()), columns: levels.to_vec() }
    }

    pub fn to_form(&self) -> Result<ComplexForm, FieldIoError> {
        match self.header.kind {
            FieldKind::Form { p, q } => {
                let d = self.header.domain()?;
                let coeffs = join_complex(&self.columns);
                let expected = crate::algebra::Basis::new(d.n(), p, q).len();
                if coeffs.len() != expected {
                    return Err(FieldIoError::Kind(format!("form needs {expected} coefficient fields")));
                }
                Ok(ComplexForm::from_coeffs(&d, p, q, coeffs))
            }
            ref k => Err(FieldIoError::Kind(format!("expected form, found {k:?}"))),
        }
    }

    pub fn to_metric(&self) -> Result<HermitianMetricField, FieldIoError> {
        if self.header.kind != FieldKind::Metric {
            return Err(FieldIoError::Kind(format!("expected metric, found {:?}", self.header.kind)));
        }
        let d = self.header.domain()?;
        if self.columns.len() != 2 * d.n() * d.n() {
            return Err(FieldIoError::Kind("metric needs n² entry fields".into()));
        }
        Ok(HermitianMetricField::new(&d, join_complex(&self.columns))?)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FieldIoError> {
        let header = serde_json::to_vec(&self.header).map_err(|e| FieldIoError::Header(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for col in &self.columns {
            for v in col {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, FieldIoError> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        if &word != MAGIC {
            return Err(FieldIoError::Magic);
        }
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(FieldIoError::Version(version));
        }
        r.read_exact(&mut word)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header)?;
        let header: FieldHeader = serde_json::from_slice(&header).map_err(|e| FieldIoError::Header(e.to_string()))?;
        let points = header.domain()?.num_points();
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let expected = header.columns * points;
        if data.len() != expected * 8 {
            return Err(FieldIoError::Truncated { expected, got: data.len() / 8 });
        }
        let values: Vec<f64> = data.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        let columns = values.chunks(points.max(1)).map(|c| c.to_vec()).collect();
        Ok(Self { header, columns })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FieldIoError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FieldIoError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
