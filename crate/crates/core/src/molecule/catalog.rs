use super::terms::{pi_term_energy, sigma_term_energy, SpectroscopicConstants};
use crate::angmom::{honl_london, upper_component_exists, Branch, HalfInt, PiCoupling, SpinComponent};
use crate::error::{Error, Result};
use crate::units::{nm_to_angular_frequency, wavenumber_to_nm};
use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

const SHIPPED_LINES: &str = include_str!("../../data/n2plus_a2_x0_lines.csv");
const SHIPPED_FAR_BANDS: &str = include_str!("../../data/n2plus_far_bands.csv");

/// Where a line's squared dipole moment comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrengthSource {
    /// Vibronic band Einstein A (1/s) times the rotational factor of this line.
    Band { einstein_a_per_s: f64, honl_london: f64 },
    /// Explicit line strength |<J'||mu||J''>|^2 in atomic units.
    Explicit { mu_squared_au: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLine {
    pub band: String,
    pub branch: Branch,
    pub n_lower: u32,
    pub j_lower: HalfInt,
    pub j_upper: HalfInt,
    pub wavelength_nm: f64,
    pub strength: StrengthSource,
}

impl TransitionLine {
    pub fn angular_frequency(&self) -> f64 {
        nm_to_angular_frequency(self.wavelength_nm)
    }

    /// Human-readable label such as `Q12(7/2)`.
    pub fn label(&self) -> String {
        format!("{}({})", self.branch, self.j_lower)
    }

    /// Checks internal consistency; `coupling` is needed only to test
    /// whether the upper component exists.
    pub fn validate(&self, coupling: Option<&PiCoupling>) -> Result<()> {
        let ctx = || format!("{} {}", self.band, self.label());
        if !(self.wavelength_nm.is_finite() && self.wavelength_nm > 0.0) {
            return Err(Error::Validation(format!("{}: wavelength must be > 0", ctx())));
        }
        let comp = SpinComponent::of_sigma_level(self.n_lower, self.j_lower)
            .map_err(|e| Error::Validation(format!("{}: {e}", ctx())))?;
        if comp != self.branch.lower {
            return Err(Error::Validation(format!(
                "{}: N'' = {}, J'' = {} is an {comp:?} level",
                ctx(),
                self.n_lower,
                self.j_lower
            )));
        }
        if (self.j_upper - self.j_lower).twice() != 2 * self.branch.kind.delta_j() {
            return Err(Error::Validation(format!("{}: J' = {} inconsistent with branch", ctx(), self.j_upper)));
        }
        if let Some(c) = coupling {
            if !upper_component_exists(self.j_upper, self.branch.upper, c) {
                return Err(Error::Validation(format!("{}: upper level does not exist", ctx())));
            }
        }
        let ok = match self.strength {
            StrengthSource::Band { einstein_a_per_s, honl_london } => {
                einstein_a_per_s.is_finite() && einstein_a_per_s > 0.0 && honl_london >= 0.0
            }
            StrengthSource::Explicit { mu_squared_au } => mu_squared_au.is_finite() && mu_squared_au >= 0.0,
        };
        if !ok {
            return Err(Error::Validation(format!("{}: invalid strength {:?}", ctx(), self.strength)));
        }
        Ok(())
    }
}

/// A vibronic band treated without rotational structure.
#[derive(Debug, Clone, PartialEq)]
pub struct FarBand {
    pub band: String,
    pub wavelength_nm: f64,
    pub einstein_a_per_s: f64,
}

/// Immutable line list plus far bands and the core polarizability.
#[derive(Debug, Clone)]
pub struct LineCatalog {
    lines: Vec<TransitionLine>,
    far_bands: Vec<FarBand>,
    core_polarizability_au: f64,
    coupling: Option<PiCoupling>,
    by_level: HashMap<(u32, HalfInt), Vec<usize>>,
}

/// Source for [`build_line_catalog`]. A `far_bands` of `None` selects the
/// shipped far-band list.
#[derive(Debug, Clone)]
pub enum CatalogSource {
    Files { lines: PathBuf, far_bands: Option<PathBuf> },
    Constants { constants: SpectroscopicConstants, n_lower_max: u32, far_bands: Option<PathBuf> },
}

pub fn build_line_catalog(source: &CatalogSource) -> Result<LineCatalog> {
    let far = |p: &Option<PathBuf>| -> Result<Vec<FarBand>> {
        match p {
            Some(path) => parse_far_bands(&read(path)?),
            None => parse_far_bands(SHIPPED_FAR_BANDS),
        }
    };
    match source {
        CatalogSource::Files { lines, far_bands } => LineCatalog::from_csv_str(&read(lines)?, far(far_bands)?),
        CatalogSource::Constants { constants, n_lower_max, far_bands } => {
            LineCatalog::from_constants(constants, *n_lower_max, far(far_bands)?)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

impl LineCatalog {
    /// Assembles and validates a catalog.
    pub fn new(
        lines: Vec<TransitionLine>,
        far_bands: Vec<FarBand>,
        core_polarizability_au: f64,
        coupling: Option<PiCoupling>,
    ) -> Result<Self> {
        if lines.is_empty() && far_bands.is_empty() {
            return Err(Error::Validation("catalog has no lines".into()));
        }
        if !core_polarizability_au.is_finite() {
            return Err(Error::Validation("core polarizability must be finite".into()));
        }
        let mut seen = HashSet::new();
        let mut by_level: HashMap<(u32, HalfInt), Vec<usize>> = HashMap::new();
        for (i, line) in lines.iter().enumerate() {
            line.validate(coupling.as_ref())?;
            if !seen.insert((line.band.clone(), line.branch, line.n_lower, line.j_lower)) {
                return Err(Error::Validation(format!("duplicate line {} {}", line.band, line.label())));
            }
            by_level.entry((line.n_lower, line.j_lower)).or_default().push(i);
        }
        for b in &far_bands {
            if !(b.wavelength_nm > 0.0 && b.einstein_a_per_s >= 0.0) {
                return Err(Error::Validation(format!("far band {}: invalid values", b.band)));
            }
        }
        Ok(LineCatalog { lines, far_bands, core_polarizability_au, coupling, by_level })
    }

    /// The N2+ A(2)-X(0) line list and far bands shipped with the crate.
    pub fn shipped() -> Self {
        let far = parse_far_bands(SHIPPED_FAR_BANDS).expect("shipped far bands parse");
        Self::from_csv_str(SHIPPED_LINES, far).expect("shipped catalog parses")
    }

    pub fn shipped_far_bands() -> Vec<FarBand> {
        parse_far_bands(SHIPPED_FAR_BANDS).expect("shipped far bands parse")
    }

    /// Parses the line-list CSV format (see the shipped file for an example).
    pub fn from_csv_str(text: &str, far_bands: Vec<FarBand>) -> Result<Self> {
        let meta = parse_metadata(text)?;
        let core = *meta
            .get("core_polarizability_au")
            .ok_or_else(|| Error::Validation("missing metadata key core_polarizability_au".into()))?;
        let coupling = match (meta.get("pi_spin_orbit_cm"), meta.get("pi_rotational_cm")) {
            (Some(&a), Some(&b)) => Some(PiCoupling::new(a, b).map_err(|e| Error::Validation(e.to_string()))?),
            (None, None) => None,
            _ => return Err(Error::Validation("pi_spin_orbit_cm and pi_rotational_cm must be given together".into())),
        };

        let mut reader = csv_reader(text);
        let cols =
            Columns::new(&mut reader, &["band", "branch", "n_lower", "j_lower_x2", "j_upper_x2", "wavelength_nm"])?;
        if cols.get("einstein_a_per_s").is_none() && cols.get("mu_squared_au").is_none() {
            return Err(Error::Validation(
                "missing column: one of einstein_a_per_s or mu_squared_au is required".into(),
            ));
        }

        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line_no = record.position().map_or(0, |p| p.line());
            let field = |name: &str| cols.field(&record, name);
            let perr = |msg: String| Error::Parse { line: line_no, message: msg };

            let band = field("band").unwrap_or("").to_string();
            let branch: Branch = field("branch").unwrap_or("").parse().map_err(|e: Error| perr(e.to_string()))?;
            let n_lower: u32 = parse_num(field("n_lower"), "n_lower").map_err(perr)?;
            let j_lower = HalfInt::from_twice(parse_num(field("j_lower_x2"), "j_lower_x2").map_err(perr)?);
            let j_upper = HalfInt::from_twice(parse_num(field("j_upper_x2"), "j_upper_x2").map_err(perr)?);
            let wavelength_nm: f64 = parse_num(field("wavelength_nm"), "wavelength_nm").map_err(perr)?;
            let a = optional_num(field("einstein_a_per_s"), "einstein_a_per_s").map_err(perr)?;
            let mu2 = optional_num(field("mu_squared_au"), "mu_squared_au").map_err(perr)?;

            let strength = match (a, mu2) {
                (Some(einstein_a_per_s), None) => {
                    let c = coupling.as_ref().ok_or_else(|| {
                        perr("Einstein-A lines need pi_spin_orbit_cm and pi_rotational_cm metadata".into())
                    })?;
                    let hl = honl_london(branch, j_lower, c)
                        .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
                    StrengthSource::Band { einstein_a_per_s, honl_london: hl }
                }
                (None, Some(mu_squared_au)) => StrengthSource::Explicit { mu_squared_au },
                _ => {
                    return Err(Error::Validation(format!(
                        "line {line_no}: exactly one of einstein_a_per_s and mu_squared_au must be set"
                    )))
                }
            };
            let line = TransitionLine { band, branch, n_lower, j_lower, j_upper, wavelength_nm, strength };
            line.validate(coupling.as_ref()).map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
            lines.push(line);
        }
        if lines.is_empty() {
            return Err(Error::Validation("line list is empty".into()));
        }
        Self::new(lines, far_bands, core, coupling)
    }

    /// Generates every P, Q and R line (main and satellite) from lower
    /// levels N'' = 0..=n_lower_max using term-value formulas.
    pub fn from_constants(c: &SpectroscopicConstants, n_lower_max: u32, far_bands: Vec<FarBand>) -> Result<Self> {
        Self::new(generate_lines(c, n_lower_max)?, far_bands, c.core_polarizability_au, Some(c.upper.coupling()?))
    }

    pub fn lines(&self) -> &[TransitionLine] {
        &self.lines
    }

    pub fn far_bands(&self) -> &[FarBand] {
        &self.far_bands
    }

    pub fn core_polarizability_au(&self) -> f64 {
        self.core_polarizability_au
    }

    pub fn coupling(&self) -> Option<&PiCoupling> {
        self.coupling.as_ref()
    }

    /// Lines whose lower level is (N'', J'').
    pub fn lines_from(&self, n: u32, j: HalfInt) -> impl Iterator<Item = &TransitionLine> {
        self.by_level.get(&(n, j)).into_iter().flat_map(move |idx| idx.iter().map(move |&i| &self.lines[i]))
    }

    pub fn find(&self, branch: Branch, j_lower: HalfInt) -> Option<&TransitionLine> {
        self.lines.iter().find(|l| l.branch == branch && l.j_lower == j_lower)
    }

    /// Copy with a different core polarizability.
    pub fn with_core_polarizability(&self, core_au: f64) -> Self {
        LineCatalog { core_polarizability_au: core_au, ..self.clone() }
    }
}

/// Term-value line positions for all branches from N'' = 0..=n_lower_max.
pub fn generate_lines(c: &SpectroscopicConstants, n_lower_max: u32) -> Result<Vec<TransitionLine>> {
    let coupling = c.upper.coupling()?;
    let mut out = Vec::new();
    for n in 0..=n_lower_max {
        let tn = 2 * n as i32;
        for tj in [tn + 1, tn - 1] {
            if tj < 1 {
                continue;
            }
            let j_lower = HalfInt::from_twice(tj);
            let lower_energy = sigma_term_energy(n, j_lower, &c.lower)?;
            for branch in Branch::all() {
                if branch.lower != SpinComponent::of_sigma_level(n, j_lower)? {
                    continue;
                }
                let Some(j_upper) = branch.upper_j(j_lower) else { continue };
                if !upper_component_exists(j_upper, branch.upper, &coupling) {
                    continue;
                }
                let nu = pi_term_energy(j_upper, branch.upper, &c.upper)? - lower_energy;
                let hl = honl_london(branch, j_lower, &coupling)?;
                out.push(TransitionLine {
                    band: c.band.clone(),
                    branch,
                    n_lower: n,
                    j_lower,
                    j_upper,
                    wavelength_nm: wavenumber_to_nm(nu),
                    strength: StrengthSource::Band { einstein_a_per_s: c.einstein_a_per_s, honl_london: hl },
                });
            }
        }
    }
    Ok(out)
}

/// Parses the far-band CSV: band, wavelength_nm, einstein_a_per_s.
pub fn parse_far_bands(text: &str) -> Result<Vec<FarBand>> {
    let mut reader = csv_reader(text);
    let cols = Columns::new(&mut reader, &["band", "wavelength_nm", "einstein_a_per_s"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let perr = |message: String| Error::Parse { line, message };
        out.push(FarBand {
            band: cols.field(&record, "band").unwrap_or("").to_string(),
            wavelength_nm: parse_num(cols.field(&record, "wavelength_nm"), "wavelength_nm").map_err(perr)?,
            einstein_a_per_s: parse_num(cols.field(&record, "einstein_a_per_s"), "einstein_a_per_s").map_err(perr)?,
        });
    }
    Ok(out)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

/// `# key = value` comment lines with numeric values.
fn parse_metadata(text: &str) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let Some(body) = raw.trim_start().strip_prefix('#') else { continue };
        let Some((key, value)) = body.split_once('=') else { continue };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            continue;
        }
        let v: f64 = value.trim().parse().map_err(|_| Error::Parse {
            line: i as u64 + 1,
            message: format!("metadata {key}: '{}' is not a number", value.trim()),
        })?;
        out.insert(key.to_string(), v);
    }
    Ok(out)
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(reader: &mut csv::Reader<&[u8]>, required: &[&str]) -> Result<Self> {
        let headers = reader.headers().map_err(csv_error)?.clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(Error::Validation("file is empty".into()));
        }
        let index: HashMap<String, usize> =
            headers.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
        for name in required {
            if !index.contains_key(*name) {
                return Err(Error::Validation(format!("missing column '{name}'")));
            }
        }
        Ok(Columns { index })
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.get(name).and_then(|i| record.get(i))
    }
}

fn parse_num<T: std::str::FromStr>(field: Option<&str>, name: &str) -> std::result::Result<T, String> {
    let s = field.unwrap_or("");
    s.parse().map_err(|_| format!("{name}: cannot parse '{s}'"))
}

fn optional_num(field: Option<&str>, name: &str) -> std::result::Result<Option<f64>, String> {
    match field {
        None | Some("") => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|_| format!("{name}: cannot parse '{s}'")),
    }
}
