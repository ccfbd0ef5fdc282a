//! File formats.
//!
//! Record files are CSV with one row per (trajectory, stage, grid time, site),
//! preceded by a single `# `-prefixed JSON line carrying the schema version,
//! the file kind and the full run metadata. Grids are long-format CSV; run
//! metadata and fit results are JSON. Every JSON document and header has a
//! `schema_version` field, and readers refuse versions they do not know.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{DsfGrid, VanHoveGrid};
use crate::error::{Error, Result};
use crate::fockspace::{build_basis, LatticeSpec, QuantumState};
use crate::hamiltonian::BoseHubbardParams;
use crate::measurement::MeasurementOutcome;
use crate::trajectory::{
    Ensemble, EnsembleMeta, Readout, ThreeMeasurementEnsemble, ThreeMeasurementMeta,
    ThreeMeasurementRecord, TrajectoryRecord,
};

pub const SCHEMA_VERSION: u32 = 1;

const ENSEMBLE_KIND: &str = "ensemble";
const THREE_KIND: &str = "three_measurement";
const STATE_KIND: &str = "state";

const RECORD_COLUMNS: [&str; 9] = [
    "trajectory",
    "member",
    "stage",
    "grid_index",
    "time",
    "site",
    "outcome",
    "density",
    "noise",
];

#[derive(Serialize, Deserialize)]
struct Header<M> {
    schema_version: u32,
    kind: String,
    meta: M,
}

#[derive(Deserialize)]
struct HeaderProbe {
    schema_version: u32,
    kind: String,
}

fn check_schema(version: u32, kind: &str, expected_kind: &str) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Schema {
            expected: format!("schema_version {SCHEMA_VERSION}"),
            found: format!("schema_version {version}"),
        });
    }
    if kind != expected_kind {
        return Err(Error::Schema {
            expected: expected_kind.into(),
            found: kind.into(),
        });
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("not an index: {s:?}")))
}

fn write_header<W: Write, M: Serialize>(w: &mut W, kind: &str, meta: &M) -> Result<()> {
    let h = Header {
        schema_version: SCHEMA_VERSION,
        kind: kind.into(),
        meta,
    };
    writeln!(w, "# {}", serde_json::to_string(&h)?)?;
    Ok(())
}

/// Split off the `# {json}` line and parse it.
fn read_header<R: BufRead, M: for<'de> Deserialize<'de>>(r: &mut R, kind: &str) -> Result<M> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let json = line
        .strip_prefix("# ")
        .ok_or_else(|| Error::Parse("missing metadata header line".into()))?;
    let probe: HeaderProbe = serde_json::from_str(json)?;
    check_schema(probe.schema_version, &probe.kind, kind)?;
    let h: Header<M> = serde_json::from_str(json)?;
    Ok(h.meta)
}

fn check_columns<R: Read>(rdr: &mut csv::Reader<R>) -> Result<()> {
    let cols: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if cols != RECORD_COLUMNS {
        return Err(Error::Schema {
            expected: RECORD_COLUMNS.join(","),
            found: cols.join(","),
        });
    }
    Ok(())
}

struct Row<'a> {
    trajectory: u64,
    member: usize,
    stage: &'a str,
    grid_index: Option<usize>,
    time: f64,
    site: usize,
    outcome: f64,
    density: f64,
    noise: Option<f64>,
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, r: Row<'_>) -> Result<()> {
    w.write_record([
        r.trajectory.to_string(),
        r.member.to_string(),
        r.stage.to_string(),
        r.grid_index.map(|k| k.to_string()).unwrap_or_default(),
        num(r.time),
        r.site.to_string(),
        num(r.outcome),
        num(r.density),
        r.noise.map(num).unwrap_or_default(),
    ])?;
    Ok(())
}

struct ParsedRow {
    trajectory: u64,
    member: usize,
    stage: String,
    grid_index: Option<usize>,
    site: usize,
    outcome: f64,
    density: f64,
    noise: Option<f64>,
}

fn parse_row(rec: &csv::StringRecord) -> Result<ParsedRow> {
    let field = |i: usize| {
        rec.get(i)
            .ok_or_else(|| Error::Parse(format!("row has {} fields", rec.len())))
    };
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f64(s).map(Some)
        }
    };
    Ok(ParsedRow {
        trajectory: field(0)?
            .parse()
            .map_err(|_| Error::Parse("bad trajectory index".into()))?,
        member: parse_usize(field(1)?)?,
        stage: field(2)?.to_string(),
        grid_index: if field(3)?.is_empty() {
            None
        } else {
            Some(parse_usize(field(3)?)?)
        },
        site: parse_usize(field(5)?)?,
        outcome: parse_f64(field(6)?)?,
        density: parse_f64(field(7)?)?,
        noise: opt(field(8)?)?,
    })
}

fn outcome_rows<W: Write>(
    w: &mut csv::Writer<W>,
    trajectory: u64,
    member: usize,
    stage: &str,
    grid_index: Option<usize>,
    time: f64,
    o: &MeasurementOutcome,
) -> Result<()> {
    for j in 0..o.record.len() {
        write_row(
            w,
            Row {
                trajectory,
                member,
                stage,
                grid_index,
                time,
                site: j,
                outcome: o.record[j],
                density: o.densities[j],
                noise: Some(o.noise[j]),
            },
        )?;
    }
    Ok(())
}

pub fn write_ensemble<W: Write>(ens: &Ensemble, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    write_header(&mut w, ENSEMBLE_KIND, &ens.meta)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(RECORD_COLUMNS)?;
    let times = ens.times();
    for r in &ens.records {
        if r.firsts.len() == 1 {
            outcome_rows(
                &mut csv,
                r.index,
                r.member,
                "first",
                None,
                0.0,
                &r.firsts[0],
            )?;
        } else {
            for (k, f) in r.firsts.iter().enumerate() {
                outcome_rows(&mut csv, r.index, r.member, "first", Some(k), 0.0, f)?;
            }
        }
        for (k, ro) in r.readouts.iter().enumerate() {
            for j in 0..ro.outcome.len() {
                write_row(
                    &mut csv,
                    Row {
                        trajectory: r.index,
                        member: r.member,
                        stage: "second",
                        grid_index: Some(k),
                        time: times[k],
                        site: j,
                        outcome: ro.outcome[j],
                        density: ro.density[j],
                        noise: ro.noise.as_ref().map(|n| n[j]),
                    },
                )?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

#[derive(Default)]
struct Partial {
    member: usize,
    firsts: BTreeMap<Option<usize>, MeasurementOutcome>,
    readouts: BTreeMap<usize, Readout>,
}

fn put(v: &mut Vec<f64>, site: usize, x: f64) {
    if v.len() <= site {
        v.resize(site + 1, f64::NAN);
    }
    v[site] = x;
}

fn blank_outcome() -> MeasurementOutcome {
    MeasurementOutcome {
        record: vec![],
        noise: vec![],
        densities: vec![],
    }
}

pub fn read_ensemble<R: Read>(r: R) -> Result<Ensemble> {
    let mut r = BufReader::new(r);
    let meta: EnsembleMeta = read_header(&mut r, ENSEMBLE_KIND)?;
    let mut rdr = csv::Reader::from_reader(r);
    check_columns(&mut rdr)?;
    let mut parts: BTreeMap<u64, Partial> = BTreeMap::new();
    for rec in rdr.records() {
        let row = parse_row(&rec?)?;
        let p = parts.entry(row.trajectory).or_default();
        p.member = row.member;
        match row.stage.as_str() {
            "first" => {
                let o = p.firsts.entry(row.grid_index).or_insert_with(blank_outcome);
                put(&mut o.record, row.site, row.outcome);
                put(&mut o.densities, row.site, row.density);
                put(&mut o.noise, row.site, row.noise.unwrap_or(f64::NAN));
            }
            "second" => {
                let k = row
                    .grid_index
                    .ok_or_else(|| Error::Parse("second-stage row without grid index".into()))?;
                let ro = p.readouts.entry(k).or_insert_with(|| Readout {
                    density: vec![],
                    outcome: vec![],
                    noise: None,
                });
                put(&mut ro.outcome, row.site, row.outcome);
                put(&mut ro.density, row.site, row.density);
                if let Some(n) = row.noise {
                    put(ro.noise.get_or_insert_with(Vec::new), row.site, n);
                }
            }
            other => return Err(Error::Parse(format!("unknown stage {other:?}"))),
        }
    }
    let l = meta.lattice.sites;
    let nt = meta.protocol.times.len();
    let mut records = Vec::with_capacity(parts.len());
    for (index, p) in parts {
        let firsts: Vec<MeasurementOutcome> = p.firsts.into_values().collect();
        let readouts: Vec<Readout> = p.readouts.into_values().collect();
        let complete = |v: &[f64]| v.len() == l && v.iter().all(|x| !x.is_nan());
        let ok = (firsts.len() == 1 || firsts.len() == nt)
            && readouts.len() == nt
            && firsts.iter().all(|f| complete(&f.record))
            && readouts
                .iter()
                .all(|ro| complete(&ro.outcome) && ro.noise.as_ref().is_none_or(|n| complete(n)));
        if !ok {
            return Err(Error::Parse(format!("trajectory {index} is incomplete")));
        }
        records.push(TrajectoryRecord {
            index,
            member: p.member,
            firsts,
            readouts,
        });
    }
    Ok(Ensemble { meta, records })
}

pub fn write_three_measurement<W: Write>(ens: &ThreeMeasurementEnsemble, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    write_header(&mut w, THREE_KIND, &ens.meta)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(RECORD_COLUMNS)?;
    let times = ens.meta.protocol.times;
    for r in &ens.records {
        for (m, o) in r.outcomes.iter().enumerate() {
            outcome_rows(
                &mut csv,
                r.index,
                r.member,
                "measurement",
                Some(m),
                times[m],
                o,
            )?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_three_measurement<R: Read>(r: R) -> Result<ThreeMeasurementEnsemble> {
    let mut r = BufReader::new(r);
    let meta: ThreeMeasurementMeta = read_header(&mut r, THREE_KIND)?;
    let mut rdr = csv::Reader::from_reader(r);
    check_columns(&mut rdr)?;
    let mut parts: BTreeMap<u64, (usize, [MeasurementOutcome; 3])> = BTreeMap::new();
    for rec in rdr.records() {
        let row = parse_row(&rec?)?;
        let m = row
            .grid_index
            .filter(|&m| m < 3)
            .ok_or_else(|| Error::Parse("measurement index must be 0, 1 or 2".into()))?;
        let p = parts.entry(row.trajectory).or_insert_with(|| {
            (
                row.member,
                [blank_outcome(), blank_outcome(), blank_outcome()],
            )
        });
        let o = &mut p.1[m];
        put(&mut o.record, row.site, row.outcome);
        put(&mut o.densities, row.site, row.density);
        put(&mut o.noise, row.site, row.noise.unwrap_or(0.0));
    }
    let l = meta.lattice.sites;
    let mut records = Vec::with_capacity(parts.len());
    for (index, (member, outcomes)) in parts {
        if outcomes
            .iter()
            .any(|o| o.record.len() != l || o.record.iter().any(|x| x.is_nan()))
        {
            return Err(Error::Parse(format!("trajectory {index} is incomplete")));
        }
        records.push(ThreeMeasurementRecord {
            index,
            member,
            outcomes,
        });
    }
    Ok(ThreeMeasurementEnsemble { meta, records })
}

/// A solved state together with the model it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub schema_version: u32,
    pub kind: String,
    pub lattice: LatticeSpec,
    pub hamiltonian: BoseHubbardParams,
    pub energy: f64,
    pub residual: f64,
    pub amplitudes: Vec<Complex64>,
}

impl StateFile {
    pub fn new(
        state: &QuantumState,
        hamiltonian: BoseHubbardParams,
        energy: f64,
        residual: f64,
    ) -> Self {
        StateFile {
            schema_version: SCHEMA_VERSION,
            kind: STATE_KIND.into(),
            lattice: state.basis().spec(),
            hamiltonian,
            energy,
            residual,
            amplitudes: state.amplitudes().to_vec(),
        }
    }

    /// Rebuild the basis and the (normalized) state.
    pub fn state(&self) -> Result<QuantumState> {
        let basis = Arc::new(build_basis(self.lattice)?);
        QuantumState::new(basis, self.amplitudes.clone())
    }
}

pub fn write_state<W: Write>(s: &StateFile, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer_pretty(&mut w, s)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_state<R: Read>(r: R) -> Result<StateFile> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(r))?;
    let probe: HeaderProbe = serde_json::from_value(value.clone())?;
    check_schema(probe.schema_version, &probe.kind, STATE_KIND)?;
    Ok(serde_json::from_value(value)?)
}

/// Long-format Van Hove CSV: `dj,t,value,sem,pairs`, plus `oracle` when given.
pub fn write_van_hove_csv<W: Write>(
    g: &VanHoveGrid,
    oracle: Option<&VanHoveGrid>,
    w: W,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut cols = vec!["dj", "t", "value", "sem", "pairs"];
    if oracle.is_some() {
        cols.push("oracle");
    }
    csv.write_record(&cols)?;
    for (k, &t) in g.times.iter().enumerate() {
        for dj in g.displacements() {
            let mut row = vec![
                dj.to_string(),
                num(t),
                num(g.value(dj, k)),
                num(g.sem_at(dj, k)),
                g.pairs_at(dj).to_string(),
            ];
            if let Some(o) = oracle {
                row.push(num(o.value(dj, k)));
            }
            csv.write_record(&row)?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Long-format structure factor CSV: `q,omega,re,im,sem`.
pub fn write_dsf_csv<W: Write>(s: &DsfGrid, w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["q", "omega", "re", "im", "sem"])?;
    for (qi, &q) in s.qs.iter().enumerate() {
        for (wi, &om) in s.omegas.iter().enumerate() {
            let v = s.value(qi, wi);
            csv.write_record([
                num(q),
                num(om),
                num(v.re),
                num(v.im),
                s.sem_at(qi, wi).map(num).unwrap_or_default(),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(value: &T, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

pub fn open(path: &Path) -> Result<File> {
    Ok(File::open(path)?)
}
