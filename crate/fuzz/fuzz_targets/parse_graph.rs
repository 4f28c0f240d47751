#![no_main]

use congestion_bandit::graph::GraphSpec;
use congestion_bandit::space::AgentSpace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = GraphSpec::from_json(text) else { return };
    if spec.nodes > 64 || spec.edges.len() > 128 || spec.agents.len() > 4 {
        return;
    }
    let Ok((_, subs)) = spec.agent_subgraphs() else { return };
    for sub in subs {
        if let Ok(space) = AgentSpace::network(sub) {
            let report = space.spanner().report();
            assert_eq!(report.basis.len(), space.size());
        }
    }
});
