#![no_main]

use std::sync::OnceLock;

use congestion_bandit::graph::GraphSpec;
use congestion_bandit::space::AgentSpace;
use congestion_bandit_harness::parse_point;
use libfuzzer_sys::fuzz_target;

fn space() -> &'static AgentSpace {
    static SPACE: OnceLock<AgentSpace> = OnceLock::new();
    SPACE.get_or_init(|| {
        let spec = GraphSpec::from_json(
            r#"{"nodes": 8, "edges": [[0,1],[0,2],[1,3],[2,3],[3,4],[4,6],[4,5],[5,7],[6,7]],
                "agents": [{"s": 0, "t": 7}]}"#,
        )
        .unwrap();
        let (_, subs) = spec.agent_subgraphs().unwrap();
        AgentSpace::network(subs[0].clone()).unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(x) = parse_point(text) else { return };
    if let Ok(atoms) = space().caratheodory(&x) {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
    let _ = space().spanner().decompose(&x);
});
