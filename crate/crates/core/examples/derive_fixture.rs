//! Regenerates `fixtures/reference_fixture.{graph,scenario}` from the fixture seed.
//!
//! Only needed when the fixture version is bumped; the committed files are
//! what the library ships.

use std::path::Path;

use trustconnect::experiment::{derive_reference_fixture, FIXTURE_SEED};
use trustconnect::graph::save_graph;
use trustconnect::snapshot::save_scenario;

fn main() -> trustconnect::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let (graph, scenario) = derive_reference_fixture(FIXTURE_SEED)?;
    save_graph(&graph, dir.join("reference_fixture.graph"))?;
    save_scenario(&scenario, dir.join("reference_fixture.scenario"))?;
    println!("graph sha256 {}", graph.content_hash());
    Ok(())
}
