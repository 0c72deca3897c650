//! Byte-stable CSV rendering of the three dataset tables. Prompts embed
//! exactly what the normalized files on disk contain.

use alloc::string::String;
use core::fmt::{Display, Write};

use crate::model::{DatasetBundle, ShipStatic, Trajectory};

pub const DYNAMIC_HEADER: &str = "mmsi,time,latitude,longitude,sog";
pub const STATIC_HEADER: &str = "mmsi,name,imo,length,breadth,draught,ship_type,annual_co2,co2_per_nm,annual_distance_nm";
pub const PORTS_HEADER: &str = "name,latitude,longitude";

/// Quotes a field when it holds a comma, quote or line break.
pub fn push_field(out: &mut String, field: &str) {
    if field.contains([',', '"', '\n', '\r']) {
        out.push('"');
        for c in field.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(field);
    }
}

fn push_opt<T: Display>(out: &mut String, v: &Option<T>) {
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
}

pub fn push_static_row(out: &mut String, s: &ShipStatic) {
    let _ = write!(out, "{},", s.mmsi);
    push_field(out, s.name.as_deref().unwrap_or(""));
    out.push(',');
    push_opt(out, &s.imo.map(|i| i.get()));
    out.push(',');
    push_opt(out, &s.length);
    out.push(',');
    push_opt(out, &s.breadth);
    out.push(',');
    push_opt(out, &s.draught);
    out.push(',');
    push_field(out, s.ship_type.as_deref().unwrap_or(""));
    out.push(',');
    push_opt(out, &s.annual_co2_t);
    out.push(',');
    push_opt(out, &s.co2_per_nm_kg);
    out.push(',');
    push_opt(out, &s.annual_distance_nm);
    out.push('\n');
}

pub fn push_dynamic_rows(out: &mut String, t: &Trajectory) {
    for p in &t.points {
        let _ = writeln!(out, "{},{},{},{},{}", t.mmsi, p.time, p.position.lat, p.position.lon, p.sog);
    }
}

pub fn render_static<'a>(statics: impl IntoIterator<Item = &'a ShipStatic>) -> String {
    let mut out = String::from(STATIC_HEADER);
    out.push('\n');
    for s in statics {
        push_static_row(&mut out, s);
    }
    out
}

pub fn render_dynamic<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> String {
    let mut out = String::from(DYNAMIC_HEADER);
    out.push('\n');
    for t in trajectories {
        push_dynamic_rows(&mut out, t);
    }
    out
}

pub fn render_ports(bundle: &DatasetBundle) -> String {
    let mut out = String::from(PORTS_HEADER);
    out.push('\n');
    for p in &bundle.ports {
        push_field(&mut out, &p.name);
        let _ = writeln!(out, ",{},{}", p.position.lat, p.position.lon);
    }
    out
}
