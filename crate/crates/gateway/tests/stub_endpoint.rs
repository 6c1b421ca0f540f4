use std::sync::Arc;
use std::time::{Duration, Instant};

use civitas_core::agents::{Action, Policy};
use civitas_core::constitution::AmendmentAction;
use civitas_core::deliberation::{PerformanceSummary, ProposalContext, Proposer};
use civitas_core::env::public_goods::PggAction;
use civitas_core::sim::run_simulation;
use civitas_core::{AgentId, Constitution, EnvKind, SimulationConfig};
use civitas_gateway::deliberation::{model_protocol, ModelProposer};
use civitas_gateway::policy::ModelPolicy;
use civitas_gateway::schema;
use civitas_gateway::stub::{text_reply, tool_call_reply, StubReply, StubServer};
use civitas_gateway::{complete, ChatMessage, GatewayConfig, GatewayError, HttpTransport, Transport};
use serde_json::json;

fn config(url: &str, timeout_secs: f64) -> GatewayConfig {
    GatewayConfig {
        timeout_secs,
        ..GatewayConfig::deliberation(url, "stub-model")
    }
}

fn proposal_reply() -> serde_json::Value {
    tool_call_reply(
        "propose_amendment",
        json!({
            "action": "ADD",
            "target_rule": null,
            "new_rule_name": "Full Contribution",
            "new_rule_guidance": "Contribute all 10 tokens every round.",
            "new_rule_summary": "Contribute 10.",
            "new_rule_priority": 1,
            "justification": "The pool pays more than it costs."
        }),
    )
}

#[test]
fn slow_answers_are_retried_until_one_arrives_in_time() {
    let late = Duration::from_millis(1500);
    let stub = StubServer::start(vec![
        StubReply::Delayed(late, proposal_reply()),
        StubReply::Delayed(late, proposal_reply()),
        StubReply::Json(proposal_reply()),
    ])
    .unwrap();
    let t = HttpTransport::new(stub.url());
    let started = Instant::now();
    let out = complete(&config(&stub.url(), 0.3), &t, &[ChatMessage::user("go")], &[schema::propose_amendment()]).unwrap();
    assert_eq!(out.attempts, 3);
    assert_eq!(stub.hits(), 3);
    assert_eq!(out.calls.len(), 1);
    assert!(started.elapsed() < late * 2);
}

#[test]
fn timeouts_on_every_attempt_are_unreachable() {
    let stub = StubServer::start(vec![StubReply::Delayed(Duration::from_millis(800), proposal_reply())]).unwrap();
    let cfg = GatewayConfig {
        retries: 1,
        ..config(&stub.url(), 0.2)
    };
    let err = complete(&cfg, &HttpTransport::new(stub.url()), &[], &[]).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointUnreachable(_)), "{err:?}");
    assert_eq!(stub.hits(), 2);
}

#[test]
fn malformed_thrice_gives_empty_list_with_diagnostic() {
    let stub = StubServer::start(vec![StubReply::Raw("{\"choices\": oops".into())]).unwrap();
    let cfg = GatewayConfig {
        retries: 2,
        ..config(&stub.url(), 5.0)
    };
    let out = complete(&cfg, &HttpTransport::new(stub.url()), &[], &[schema::propose_amendment()]).unwrap();
    assert!(out.calls.is_empty());
    assert!(out.diagnostic.unwrap().contains("3 attempts"));
    assert_eq!(stub.hits(), 3);
}

#[test]
fn valid_proposal_becomes_one_amendment() {
    let stub = StubServer::start(vec![StubReply::Json(proposal_reply())]).unwrap();
    let t: Arc<dyn Transport> = Arc::new(HttpTransport::new(stub.url()));
    let mut p = ModelProposer::new(config(&stub.url(), 5.0), t);
    let blank = Constitution::blank();
    let summary = PerformanceSummary::empty(EnvKind::PublicGoods, 10);
    let got = p
        .propose(&ProposalContext {
            agent: AgentId(4),
            constitution: &blank,
            summary: &summary,
            max_proposals: 2,
        })
        .unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].action, AmendmentAction::Add);
    assert_eq!(got[0].proposer, AgentId(4));
    assert_eq!(got[0].new_rule.as_ref().unwrap().name, "Full Contribution");

    let req = &stub.requests()[0];
    assert_eq!(req["model"], "stub-model");
    assert_eq!(req["temperature"], 0.7);
    assert_eq!(req["tools"][0]["function"]["name"], "propose_amendment");
    let prompt = req["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.starts_with("You are Player 4, a participant in a constitutional deliberation."));
    assert!(prompt.contains("=== CURRENT CONSTITUTION ===\n(no rules adopted yet)\n"));
    assert!(prompt.contains("You may propose up to 2 amendment(s)"));
}

#[test]
fn closed_port_is_unreachable_without_retry() {
    let url = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}/v1/chat/completions", l.local_addr().unwrap())
    };
    let err = complete(&config(&url, 1.0), &HttpTransport::new(url.clone()), &[], &[]).unwrap_err();
    assert!(matches!(err, GatewayError::EndpointUnreachable(_)));
}

#[test]
fn server_errors_are_retried() {
    let stub = StubServer::start(vec![
        StubReply::Status(503, "busy".into()),
        StubReply::Json(text_reply("nothing to do")),
    ])
    .unwrap();
    let out = complete(&config(&stub.url(), 5.0), &HttpTransport::new(stub.url()), &[], &[]).unwrap();
    assert_eq!(out.attempts, 2);
    assert_eq!(out.content.as_deref(), Some("nothing to do"));
}

#[test]
fn model_agents_play_a_public_goods_game_through_the_stub() {
    let stub = StubServer::start(vec![StubReply::Json(tool_call_reply("contribute", json!({"amount": 10})))]).unwrap();
    let t: Arc<dyn Transport> = Arc::new(HttpTransport::new(stub.url()));
    let cfg = GatewayConfig::agent(stub.url(), "stub-model");
    let mut policies: Vec<Box<dyn Policy>> = (0..6)
        .map(|_| Box::new(ModelPolicy::new(cfg.clone(), t.clone())) as Box<dyn Policy>)
        .collect();
    let mut sim = SimulationConfig::new(EnvKind::PublicGoods, 42);
    sim.horizon = 10;
    let rec = run_simulation(&sim, &mut policies, None).unwrap();
    assert_eq!(stub.hits(), 60);
    // Everyone contributes 10 for ten rounds: 15 per round each.
    assert!(rec.per_agent_final.iter().all(|w| (*w - 150.0).abs() < 1e-9));
    let first = &stub.requests()[0];
    assert_eq!(first["temperature"], 1.0);
    assert!(first["messages"][0]["content"].as_str().unwrap().contains("Your cumulative wealth: 0\n"));
}

#[test]
fn model_deliberation_round_through_the_stub() {
    use civitas_core::deliberation::DeliberationHook;
    // Every proposer call gets the same ADD, every vote call a YEA on #1.
    let stub = StubServer::start(vec![
        StubReply::Json(proposal_reply()),
        StubReply::Json(proposal_reply()),
        StubReply::Json(tool_call_reply("vote_on_proposal", json!({"amendment_id": 1, "vote": "YEA", "reasoning": "yes"}))),
    ])
    .unwrap();
    let t: Arc<dyn Transport> = Arc::new(HttpTransport::new(stub.url()));
    let mut protocol = model_protocol(&config(&stub.url(), 5.0), t);
    let participants = [AgentId(1), AgentId(2)];
    let round = protocol.deliberate(
        0,
        10,
        &Constitution::blank(),
        &participants,
        &PerformanceSummary::empty(EnvKind::PublicGoods, 10),
    );
    // Two identical proposals merge into one.
    assert_eq!(round.proposals.len(), 1);
    assert_eq!(round.adopted, vec![1]);
    assert_eq!(round.constitution_after.rules[0].name, "Full Contribution");
    assert_eq!(round.constitution_after.version, 1);
}

#[test]
fn policy_falls_back_when_endpoint_is_gone() {
    let url = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        format!("http://{}/v1/chat/completions", l.local_addr().unwrap())
    };
    let t: Arc<dyn Transport> = Arc::new(HttpTransport::new(url.clone()));
    let mut p = ModelPolicy::new(config(&url, 1.0), t);
    let obs = civitas_core::agents::Observation::PublicGoods(civitas_core::agents::PggObservation {
        agent: AgentId(1),
        round: 1,
        horizon: 40,
        m: 1.5,
        wealth: 0.0,
        average_wealth: 0.0,
        alive: [true; 6],
        last_contributions: [None; 6],
        inbox: vec![],
    });
    let blank = Constitution::blank();
    let ctx = civitas_core::agents::DecisionContext {
        agent: AgentId(1),
        turn: 1,
        constitution: &blank,
        attempt: 0,
    };
    assert_eq!(p.decide(&obs, &ctx), Action::PublicGoods(PggAction::contribute(0)));
    assert_eq!(p.diagnostics().len(), 1);
}
