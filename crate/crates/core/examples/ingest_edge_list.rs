//! Building snapshots from a labelled `(t, i, j, l)` edge list, as for a
//! real event log, then running the adaptive estimator on it.

use std::io::Cursor;

use armsbm::community::switch_rate;
use armsbm::io::{parse_edge_list, write_edge_list, NodeMap};
use armsbm::model::{make_scenario, ScenarioId, ScenarioSize};
use armsbm::pipeline::{run, EstimatorPolicy, PolicyVariant};
use armsbm::spectral::RefineConfig;

fn main() -> armsbm::Result<()> {
    // A labelled toy log: two airports pairs, one route each day.
    let map = NodeMap::parse(Cursor::new("ATL,1\nORD,2\nDFW,3\nDEN,4\n"))?;
    let log = "t,i,j,l\n1,ATL,ORD,1\n1,ATL,ORD,1\n2,DFW,DEN,1\n2,ORD,DEN,2\n";
    let snaps = parse_edge_list(Cursor::new(log), 4, 2, 2, Some(&map))?;
    for (t, a) in snaps.iter().enumerate() {
        println!("t = {}: density {:.3}, ATL-ORD layer 1 {}", t + 1, a.density(), a.get(0, 1, 0));
    }

    // Round trip a simulated series through the text format.
    let sc = make_scenario(ScenarioId::NonStationary(1), ScenarioSize { n: Some(40), t_max: Some(60) })?;
    let series = sc.simulate(4)?;
    let mut text = Vec::new();
    write_edge_list(&mut text, &series)?;
    let back = parse_edge_list(Cursor::new(&text), 40, 2, series.len(), None)?;
    assert_eq!(back, series);
    println!("\n{} edge rows reproduce all {} snapshots", text.iter().filter(|&&b| b == b'\n').count() - 1, back.len());

    let policy = EstimatorPolicy::new(PolicyVariant::Adaptive, RefineConfig::new(2, 2, 2), back.len() - 1);
    let out = run(&back, &policy, None)?;
    for w in out.windows(2).filter(|w| w[1].0.t % 10 == 0) {
        let (prev, cur) = (&w[0].0, &w[1].0);
        println!(
            "t = {:>2}: window {:>2}, community sizes {:?}, switch rate {:.3}",
            cur.t,
            cur.k_hat,
            cur.z_hat.sizes(),
            switch_rate(&prev.z_hat, &cur.z_hat)?
        );
    }
    Ok(())
}
