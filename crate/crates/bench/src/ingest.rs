//! Source file parsing and the normalized on-disk dataset.
//!
//! The raw AIS reader follows the Danish Maritime Authority CSV export,
//! with every column name overridable. One civil day per file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use aisbench_core::geo::{BoundingBox, GeoPoint, Zone};
use aisbench_core::model::{EmissionsRow, Imo, Mmsi, RawAisRow, ShipStatic, TimeOfDay, TrackPoint, Trajectory};
use aisbench_core::prepare::{build_static, resample, StaticConflict, RESAMPLE_PERIOD_MINUTES};
use aisbench_core::{table, DatasetBundle, Port};
use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const DYNAMIC_FILE: &str = "dynamic.csv";
pub const STATIC_FILE: &str = "static.csv";
pub const PORTS_FILE: &str = "ports.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMap {
    pub timestamp: String,
    pub mmsi: String,
    pub latitude: String,
    pub longitude: String,
    pub sog: String,
    pub name: String,
    pub imo: String,
    pub length: String,
    pub breadth: String,
    pub draught: String,
    pub ship_type: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            timestamp: "# Timestamp".into(),
            mmsi: "MMSI".into(),
            latitude: "Latitude".into(),
            longitude: "Longitude".into(),
            sog: "SOG".into(),
            name: "Name".into(),
            imo: "IMO".into(),
            length: "Length".into(),
            breadth: "Width".into(),
            draught: "Draught".into(),
            ship_type: "Ship type".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawParse {
    pub rows: Vec<RawAisRow>,
    pub total: usize,
    pub dropped: usize,
    pub date: Option<NaiveDate>,
}

impl RawParse {
    pub fn mostly_dropped(&self) -> bool {
        self.dropped * 2 > self.total
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(BenchError::io(path))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(BufReader::new(file)))
}

fn header_index<'a>(headers: &'a csv::StringRecord, path: &'a Path) -> impl Fn(&str) -> Result<usize> + 'a {
    let owned = path.to_path_buf();
    move |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| BenchError::Data(format!("{}: missing required column {name:?}", owned.display())))
    }
}

fn optional_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Empty and placeholder values read as absent.
fn text_field(s: Option<&str>) -> Option<String> {
    let s = s?.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("unknown") || s.eq_ignore_ascii_case("undefined") {
        None
    } else {
        Some(s.to_string())
    }
}

fn positive(s: Option<&str>) -> Option<f64> {
    s?.trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)
}

fn non_negative(s: Option<&str>) -> Option<f64> {
    s?.trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)
}

fn parse_timestamp(text: &str, format: &str) -> Option<NaiveDateTime> {
    let t = text.trim();
    NaiveDateTime::parse_from_str(t, format)
        .or_else(|_| NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(t, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

/// Reads raw AIS rows, dropping (and counting) rows that fail validation.
/// Rows spanning more than one calendar date are an error.
pub fn parse_raw(path: &Path, columns: &ColumnMap, timestamp_format: &str) -> Result<RawParse> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    let idx = header_index(&headers, path);
    let (c_ts, c_mmsi, c_lat, c_lon, c_sog) =
        (idx(&columns.timestamp)?, idx(&columns.mmsi)?, idx(&columns.latitude)?, idx(&columns.longitude)?, idx(&columns.sog)?);
    let opt = |name: &str| optional_index(&headers, name);
    let (c_name, c_imo, c_len, c_br, c_dr, c_type) = (
        opt(&columns.name),
        opt(&columns.imo),
        opt(&columns.length),
        opt(&columns.breadth),
        opt(&columns.draught),
        opt(&columns.ship_type),
    );

    let mut out = RawParse { rows: Vec::new(), total: 0, dropped: 0, date: None };
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(BenchError::Data(format!("{}: {e}", path.display()))),
        }
        out.total += 1;
        let get = |c: Option<usize>| c.and_then(|c| record.get(c));
        let parsed = (|| {
            let ts = parse_timestamp(record.get(c_ts)?, timestamp_format)?;
            let mmsi = Mmsi::parse(record.get(c_mmsi)?)?;
            let lat = record.get(c_lat)?.trim().parse().ok()?;
            let lon = record.get(c_lon)?.trim().parse().ok()?;
            let position = GeoPoint::new(lat, lon)?;
            let sog = match record.get(c_sog).map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)?),
            };
            let mut row = RawAisRow::new(ts.num_seconds_from_midnight(), mmsi, position, sog);
            row.name = text_field(get(c_name));
            row.imo = get(c_imo).and_then(Imo::parse);
            row.length = positive(get(c_len));
            row.breadth = positive(get(c_br));
            row.draught = positive(get(c_dr));
            row.ship_type = text_field(get(c_type));
            Some((ts.date(), row))
        })();
        match parsed {
            Some((date, row)) if row.is_valid() => {
                match out.date {
                    None => out.date = Some(date),
                    Some(d) if d != date => {
                        return Err(BenchError::Data(format!(
                            "{}: rows span {d} and {date}; one civil day per input",
                            path.display()
                        )))
                    }
                    _ => {}
                }
                out.rows.push(row);
            }
            _ => out.dropped += 1,
        }
    }
    if out.mostly_dropped() {
        log::warn!("{}: dropped {} of {} rows as invalid", path.display(), out.dropped, out.total);
    } else if out.dropped > 0 {
        log::info!("{}: dropped {} invalid rows", path.display(), out.dropped);
    }
    Ok(out)
}

/// IMO-keyed emissions: `imo,annual_co2,co2_per_nm,annual_distance_nm`,
/// with annual CO2 in tonnes and the rate in kg per nautical mile.
pub fn parse_emissions(path: &Path) -> Result<Vec<EmissionsRow>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    let idx = header_index(&headers, path);
    let c_imo = idx("imo")?;
    let c_co2 = idx("annual_co2")?;
    let c_rate = optional_index(&headers, "co2_per_nm");
    let c_dist = optional_index(&headers, "annual_distance_nm");
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        let Some(imo) = rec.get(c_imo).and_then(Imo::parse) else {
            log::warn!("{}: row {} has no valid IMO, skipped", path.display(), line + 2);
            continue;
        };
        out.push(EmissionsRow {
            imo,
            annual_co2_t: non_negative(rec.get(c_co2)),
            co2_per_nm_kg: non_negative(c_rate.and_then(|c| rec.get(c))),
            annual_distance_nm: positive(c_dist.and_then(|c| rec.get(c))),
        });
    }
    Ok(out)
}

/// `name,latitude,longitude`; every port gets the configured approach radius.
pub fn parse_ports(path: &Path, radius_m: f64) -> Result<Vec<Port>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    let idx = header_index(&headers, path);
    let (c_name, c_lat, c_lon) = (idx("name")?, idx("latitude")?, idx("longitude")?);
    let mut out: Vec<Port> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        let name = rec.get(c_name).unwrap_or("").trim().to_string();
        let pos = (|| GeoPoint::new(rec.get(c_lat)?.trim().parse().ok()?, rec.get(c_lon)?.trim().parse().ok()?))();
        let Some(pos) = pos.filter(|_| !name.is_empty()) else {
            return Err(BenchError::Data(format!("{}: bad port row {:?}", path.display(), rec)));
        };
        if out.iter().any(|p| p.name.eq_ignore_ascii_case(&name)) {
            return Err(BenchError::Data(format!("{}: duplicate port {name:?}", path.display())));
        }
        out.push(Port::new(name, pos, radius_m));
    }
    Ok(out)
}

/// `name,min_lat,min_lon,max_lat,max_lon,area_rank`.
pub fn parse_zones(path: &Path) -> Result<Vec<Zone>> {
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?.clone();
    let idx = header_index(&headers, path);
    let cols = [idx("name")?, idx("min_lat")?, idx("min_lon")?, idx("max_lat")?, idx("max_lon")?, idx("area_rank")?];
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
        let f = |i: usize| rec.get(cols[i]).unwrap_or("").trim();
        let zone = (|| {
            let bounds = BoundingBox::new(f(1).parse().ok()?, f(2).parse().ok()?, f(3).parse().ok()?, f(4).parse().ok()?)?;
            Some(Zone::new(f(0), bounds, f(5).parse().ok()?))
        })();
        out.push(zone.ok_or_else(|| BenchError::Data(format!("{}: bad zone row {:?}", path.display(), rec)))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub raw_rows: usize,
    pub dropped_rows: usize,
    pub unmatched_vessels: Vec<Mmsi>,
    pub conflicts: Vec<StaticConflict>,
    pub without_emissions: usize,
}

/// Resamples, builds the static table and pairs both into a bundle.
pub fn assemble(raw: &RawParse, emissions: &[EmissionsRow], ports: Vec<Port>) -> (DatasetBundle, IngestReport) {
    let trajectories = resample(&raw.rows, RESAMPLE_PERIOD_MINUTES);
    let (statics, conflicts) = build_static(&raw.rows, emissions);
    for c in &conflicts {
        log::debug!("vessel {}: {} distinct {} values, kept the modal one", c.mmsi, c.distinct_values, c.field);
    }
    let (bundle, unmatched) = DatasetBundle::assemble(trajectories, statics, ports);
    if !unmatched.is_empty() {
        log::info!("dropped {} vessels lacking positions or static data", unmatched.len());
    }
    let without_emissions = bundle.statics.iter().filter(|s| !s.has_emissions()).count();
    let report = IngestReport {
        raw_rows: raw.total,
        dropped_rows: raw.dropped,
        unmatched_vessels: unmatched,
        conflicts,
        without_emissions,
    };
    (bundle, report)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(BenchError::io(path))?;
    f.write_all(text.as_bytes()).map_err(BenchError::io(path))
}

/// Writes `dynamic.csv`, `static.csv` and `ports.csv` into `dir`.
pub fn write_normalized(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    write_file(&dir.join(DYNAMIC_FILE), &table::render_dynamic(&bundle.trajectories))?;
    write_file(&dir.join(STATIC_FILE), &table::render_static(&bundle.statics))?;
    write_file(&dir.join(PORTS_FILE), &table::render_ports(bundle))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(BenchError::MissingArtifact { path: path.to_path_buf(), stage: "ingest" })
    }
}

fn bad_row(path: &Path, rec: &csv::StringRecord) -> BenchError {
    BenchError::Data(format!("{}: malformed row {:?}", path.display(), rec))
}

/// Reads the three normalized files back. Inverse of [`write_normalized`].
pub fn read_normalized(dir: &Path, port_radius_m: f64) -> Result<DatasetBundle> {
    let (dyn_path, static_path, ports_path) = (dir.join(DYNAMIC_FILE), dir.join(STATIC_FILE), dir.join(PORTS_FILE));
    for p in [&dyn_path, &static_path, &ports_path] {
        require(p)?;
    }
    let mut tracks: HashMap<Mmsi, Vec<TrackPoint>> = HashMap::new();
    let mut order: Vec<Mmsi> = Vec::new();
    for rec in open_csv(&dyn_path)?.records() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", dyn_path.display())))?;
        let parsed = (|| {
            let mmsi = Mmsi::parse(rec.get(0)?)?;
            let time = TimeOfDay::parse(rec.get(1)?)?;
            let pos = GeoPoint::new(rec.get(2)?.parse().ok()?, rec.get(3)?.parse().ok()?)?;
            Some((mmsi, TrackPoint::new(time, pos, rec.get(4)?.parse().ok()?)))
        })();
        let (mmsi, p) = parsed.ok_or_else(|| bad_row(&dyn_path, &rec))?;
        tracks
            .entry(mmsi)
            .or_insert_with(|| {
                order.push(mmsi);
                Vec::new()
            })
            .push(p);
    }
    let trajectories = order.into_iter().map(|m| Trajectory::new(m, tracks.remove(&m).unwrap_or_default())).collect();

    let mut statics = Vec::new();
    for rec in open_csv(&static_path)?.records() {
        let rec = rec.map_err(|e| BenchError::Data(format!("{}: {e}", static_path.display())))?;
        let mmsi = rec.get(0).and_then(Mmsi::parse).ok_or_else(|| bad_row(&static_path, &rec))?;
        let num = |i: usize| rec.get(i).filter(|s| !s.is_empty()).and_then(|s| s.parse::<f64>().ok());
        let mut s = ShipStatic::new(mmsi);
        s.name = rec.get(1).filter(|s| !s.is_empty()).map(str::to_string);
        s.imo = rec.get(2).and_then(Imo::parse);
        s.length = num(3);
        s.breadth = num(4);
        s.draught = num(5);
        s.ship_type = rec.get(6).filter(|s| !s.is_empty()).map(str::to_string);
        s.annual_co2_t = num(7);
        s.co2_per_nm_kg = num(8);
        s.annual_distance_nm = num(9);
        statics.push(s);
    }
    let ports = parse_ports(&ports_path, port_radius_m)?;
    let (bundle, dropped) = DatasetBundle::assemble(trajectories, statics, ports);
    if !dropped.is_empty() {
        return Err(BenchError::Data(format!("{}: {} vessels lack a dynamic or static row", dir.display(), dropped.len())));
    }
    bundle.check().map_err(|e| BenchError::Data(format!("{}: {e}", dir.display())))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "# Timestamp,Type of mobile,MMSI,Latitude,Longitude,Navigational status,SOG,COG,IMO,Name,Ship type,Width,Length,Draught";

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_valid_rows() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}\n\
             20/11/2024 00:00:01,Class A,219000001,56.1,10.2,Moored,0.0,0,IMO9123456,NORD,Cargo,20,120,7.5\n\
             20/11/2024 00:05:01,Class A,219000001,56.1,10.2,Moored,0.1,0,IMO9123456,NORD,Cargo,20,120,7.5\n\
             20/11/2024 00:00:30,Class A,219000002,56.2,10.3,Under way,8.0,90,Unknown,,,,,\n"
        );
        let raw = parse_raw(&write(dir.path(), "raw.csv", &body), &ColumnMap::default(), "%d/%m/%Y %H:%M:%S").unwrap();
        assert_eq!((raw.rows.len(), raw.dropped), (3, 0));
        assert_eq!(raw.rows[0].imo, Imo::new(9123456));
        assert_eq!(raw.rows[2].imo, None);
        assert_eq!(raw.rows[2].name, None);
        assert_eq!(raw.date, NaiveDate::from_ymd_opt(2024, 11, 20));
    }

    #[test]
    fn invalid_latitude_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}\n\
             20/11/2024 00:00:01,Class A,219000001,91.0,10.2,,0.0,,,,,,,\n\
             20/11/2024 00:00:01,Class A,21900001,56.0,10.2,,0.0,,,,,,,\n\
             20/11/2024 00:00:01,Class A,219000003,56.0,10.2,,0.0,,,,,,,\n"
        );
        let raw = parse_raw(&write(dir.path(), "raw.csv", &body), &ColumnMap::default(), "%d/%m/%Y %H:%M:%S").unwrap();
        assert_eq!((raw.rows.len(), raw.dropped), (1, 2));
    }

    #[test]
    fn missing_column_and_file_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "raw.csv", "MMSI,Latitude\n219000001,56.0\n");
        let err = parse_raw(&p, &ColumnMap::default(), "%d/%m/%Y %H:%M:%S").unwrap_err();
        assert!(err.to_string().contains("# Timestamp"), "{err}");
        assert!(parse_raw(&dir.path().join("nope.csv"), &ColumnMap::default(), "").is_err());
    }

    #[test]
    fn two_days_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{HEADER}\n\
             20/11/2024 23:59:00,Class A,219000001,56.0,10.2,,0.0,,,,,,,\n\
             21/11/2024 00:01:00,Class A,219000001,56.0,10.2,,0.0,,,,,,,\n"
        );
        let err = parse_raw(&write(dir.path(), "raw.csv", &body), &ColumnMap::default(), "%d/%m/%Y %H:%M:%S").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn emissions_and_ports() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "imo,annual_co2,co2_per_nm,annual_distance_nm\n9123456,1500.5,210,\nbad,1,1,1\n");
        let rows = parse_emissions(&e).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].co2_per_nm_kg, Some(210.0));
        assert_eq!(rows[0].annual_distance_nm, None);
        let p = write(dir.path(), "p.csv", "name,latitude,longitude\nAarhus,56.15,10.23\naarhus,56.0,10.0\n");
        assert!(parse_ports(&p, 2000.0).is_err());
    }
}
