//! The generated one-day fixture has the structure the query catalog needs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use aisbench::ingest::{assemble, parse_emissions, parse_ports, parse_raw, ColumnMap};
use aisbench::synth::{write_fixture, Role, EMISSIONS_FILE, RAW_FILE};
use aisbench_core::catalog::Requirement;
use aisbench_core::oracle::{OracleContext, SegmentationConfig};
use aisbench_core::Mmsi;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn generated_day_has_designed_structure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SegmentationConfig::default();
    let ports = parse_ports(&fixtures().join("ports.csv"), cfg.port_radius_m).unwrap();
    let fleet = write_fixture(dir.path(), 20241120, &ports).unwrap();
    assert_eq!(fleet.len(), 300);

    let raw = parse_raw(&dir.path().join(RAW_FILE), &ColumnMap::default(), "%d/%m/%Y %H:%M:%S").unwrap();
    assert!(raw.dropped > 0 && !raw.mostly_dropped());
    let emissions = parse_emissions(&dir.path().join(EMISSIONS_FILE)).unwrap();
    let (bundle, report) = assemble(&raw, &emissions, ports);
    assert_eq!(bundle.size(), 300, "unmatched: {:?}", report.unmatched_vessels);

    let role: BTreeMap<Mmsi, Role> = fleet.iter().map(|f| (f.mmsi, f.role)).collect();
    let ferries: Vec<Mmsi> = fleet.iter().filter(|f| f.role == Role::Ferry).map(|f| f.mmsi).collect();
    let ctx = OracleContext::new(&bundle, cfg, BTreeMap::new(), ferries.clone());

    let mut found = ctx.ferry_heuristic();
    found.sort();
    assert_eq!(found, ferries, "ferry heuristic disagrees with the designed ferries");
    for &f in &ferries {
        assert!(ctx.round_trips(f) >= 3, "ferry {f} completed {} round trips", ctx.round_trips(f));
    }

    let leg = |from: &str, to: &str| Requirement::Leg { from: from.into(), to: to.into() };
    let aarhus_skagen = bundle.mmsis().into_iter().filter(|&m| ctx.satisfies(&leg("Aarhus", "Skagen"), m)).count();
    let skagen_aarhus = bundle.mmsis().into_iter().filter(|&m| ctx.satisfies(&leg("Skagen", "Aarhus"), m)).count();
    assert!(aarhus_skagen >= 10, "{aarhus_skagen} Aarhus-Skagen legs");
    assert!(skagen_aarhus >= 6, "{skagen_aarhus} Skagen-Aarhus legs");

    let risk = ctx.collision_risk();
    let pairs = risk.iter().filter(|m| fleet.iter().any(|f| f.mmsi == **m && f.group.as_deref().is_some_and(|g| g.starts_with("pair-")))).count();
    assert_eq!(pairs, 6, "collision set {risk:?}");
    for m in &risk {
        assert_ne!(role[m], Role::Moored, "{m} never moves");
    }
    let stayed = bundle
        .trajectories
        .iter()
        .filter(|t| ctx.visits(t.mmsi).len() == 1 && ctx.legs(t.mmsi).is_empty())
        .filter(|t| role[&t.mmsi] == Role::Moored)
        .count();
    assert!(stayed >= 35, "{stayed} moored vessels stayed in port");
}
