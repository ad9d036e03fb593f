use cage_ccc::agent::{run_vehicle, AgentConfig};
use cage_ccc::hub::audit_is_exclusive;
use cage_ccc::{start, CccClient, FleetConfig, HubConfig, ServiceConfig};
use cage_core::mode::{DrivingMode, MissionState};
use cage_core::wire::{Action, DestinationStatus, Envelope, Message, Teleop};
use cage_sim::Scenario;
use futures::{SinkExt, StreamExt};
use std::net::SocketAddr;
use std::time::Duration;
use tokio::io::{AsyncReadExt, AsyncWriteExt};

const WAIT: Duration = Duration::from_secs(20);

fn local() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

fn config(holder_timeout: Duration) -> ServiceConfig {
    ServiceConfig {
        listen: local(),
        http: Some(local()),
        fleet: FleetConfig::single("pluto"),
        hub: HubConfig { holder_timeout, ..Default::default() },
        ..Default::default()
    }
}

fn agent(addr: SocketAddr, scenario: &str, pace: Option<f64>) -> AgentConfig {
    let mut cfg = AgentConfig::new("pluto", addr, Scenario::builtin(scenario).unwrap());
    cfg.pace = pace;
    cfg.reconnect_every = Duration::from_millis(50);
    cfg
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_acquires_grant_exactly_one() {
    let svc = start(config(Duration::from_secs(5))).await.unwrap();
    let addr = svc.tcp_addr;
    let mut tasks = Vec::new();
    for c in 0..10 {
        tasks.push(tokio::spawn(async move {
            let mut client = CccClient::connect(addr, &format!("ccc-{c}")).await.unwrap();
            let mut seqs = Vec::new();
            for _ in 0..10 {
                seqs.push(client.request("pluto", Action::AcquireControl).await.unwrap());
            }
            let mut grants = 0;
            for s in seqs {
                match client.reply_to(s, WAIT).await.unwrap() {
                    Message::ControlGrant(_) => grants += 1,
                    Message::ControlDeny(_) => {}
                    other => panic!("unexpected reply {other:?}"),
                }
            }
            grants
        }));
    }
    let mut total = 0;
    for t in tasks {
        total += t.await.unwrap();
    }
    assert_eq!(total, 1);
    assert!(svc.hub.holder("pluto").is_some());
    assert!(audit_is_exclusive(&svc.hub.audit_log()));
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn state_updates_arrive_in_order() {
    let svc = start(config(Duration::from_secs(5))).await.unwrap();
    let mut ui = CccClient::connect(svc.tcp_addr, "ui-1").await.unwrap();
    let s = ui.request("pluto", Action::Subscribe).await.unwrap();
    ui.recv_until(WAIT, |_, m| matches!(m, Message::DestinationList(_)).then_some(())).await.unwrap();
    assert!(s > 0);

    let mut cfg = agent(svc.tcp_addr, "2", None);
    cfg.sim.duration = Some(10.0);
    let vehicle = tokio::spawn(run_vehicle(cfg));

    let mut last: Option<(u64, u64)> = None;
    let mut count = 0;
    while count < 200 {
        let (seq, tick) = ui
            .recv_until(WAIT, |env, m| match m {
                Message::StateUpdate(u) => Some((env.sequence, u.tick)),
                _ => None,
            })
            .await
            .unwrap();
        if let Some((ls, lt)) = last {
            assert!(seq > ls && tick == lt + 1, "out of order: {ls}/{lt} then {seq}/{tick}");
        }
        last = Some((seq, tick));
        count += 1;
    }
    let report = vehicle.await.unwrap().unwrap();
    assert_eq!(report.updates_sent, 200);
    assert_eq!(last.unwrap().1, 199);
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn only_holder_commands_reach_the_vehicle() {
    let svc = start(config(Duration::from_secs(5))).await.unwrap();
    let mut cfg = agent(svc.tcp_addr, "2", Some(20.0));
    cfg.sim.duration = Some(40.0);
    let vehicle = tokio::spawn(run_vehicle(cfg));

    let mut a = CccClient::connect(svc.tcp_addr, "ccc-a").await.unwrap();
    let mut b = CccClient::connect(svc.tcp_addr, "ccc-b").await.unwrap();
    let s = a.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(a.reply_to(s, WAIT).await.unwrap(), Message::ControlGrant(_)));
    // the vehicle may not have registered yet; retry until the relay path is up
    let ack = loop {
        let s = a.request("pluto", Action::SetDrivingMode { driving_mode: DrivingMode::LimitedAutonomousDriving }).await.unwrap();
        match a.reply_to(s, WAIT).await.unwrap() {
            Message::CommandAck(ack) if ack.accepted => break ack,
            Message::CommandAck(ack) if ack.reason.as_deref() == Some("vehicle not connected") => {
                tokio::time::sleep(Duration::from_millis(20)).await
            }
            other => panic!("unexpected reply {other:?}"),
        }
    };
    assert_eq!(ack.resulting_state.unwrap().driving_mode, DrivingMode::LimitedAutonomousDriving);

    for mode in [DrivingMode::EmergencyStop, DrivingMode::FullyAutonomousDriving] {
        let s = b.request("pluto", Action::SetDrivingMode { driving_mode: mode }).await.unwrap();
        match b.reply_to(s, WAIT).await.unwrap() {
            Message::CommandAck(ack) => assert!(!ack.accepted),
            other => panic!("unexpected reply {other:?}"),
        }
    }
    b.send("pluto", &Message::Teleop(Teleop { steering: 0.5, throttle: -1.0 })).await.unwrap();
    let s = b.request("pluto", Action::ActivateDestination { destination_id: "loading-bay".into(), position: None }).await.unwrap();
    assert!(matches!(b.reply_to(s, WAIT).await.unwrap(), Message::CommandAck(ack) if !ack.accepted));

    let s = a.request("pluto", Action::SetDrivingMode { driving_mode: DrivingMode::FullyAutonomousDriving }).await.unwrap();
    assert!(matches!(a.reply_to(s, WAIT).await.unwrap(), Message::CommandAck(ack) if ack.accepted));

    let report = vehicle.await.unwrap().unwrap();
    assert_eq!(report.received.len(), 2);
    assert!(report.received.iter().all(|r| r.request.requester.as_deref() == Some("ccc-a") && r.request.requester_has_control));
    assert!(audit_is_exclusive(&svc.hub.audit_log()));
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn release_then_another_ccc_acquires() {
    let svc = start(config(Duration::from_secs(5))).await.unwrap();
    let mut a = CccClient::connect(svc.tcp_addr, "ccc-a").await.unwrap();
    let mut b = CccClient::connect(svc.tcp_addr, "ccc-b").await.unwrap();
    let s = a.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(a.reply_to(s, WAIT).await.unwrap(), Message::ControlGrant(_)));
    let s = b.request("pluto", Action::AcquireControl).await.unwrap();
    match b.reply_to(s, WAIT).await.unwrap() {
        Message::ControlDeny(d) => assert_eq!(d.holder.as_deref(), Some("ccc-a")),
        other => panic!("unexpected reply {other:?}"),
    }
    let s = b.request("pluto", Action::ReleaseControl).await.unwrap();
    assert!(matches!(b.reply_to(s, WAIT).await.unwrap(), Message::CommandAck(ack) if !ack.accepted));
    let s = a.request("pluto", Action::ReleaseControl).await.unwrap();
    assert!(matches!(a.reply_to(s, WAIT).await.unwrap(), Message::CommandAck(ack) if ack.accepted));
    let s = b.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(b.reply_to(s, WAIT).await.unwrap(), Message::ControlGrant(g) if g.holder == "ccc-b"));
    assert!(audit_is_exclusive(&svc.hub.audit_log()));
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn rights_of_a_vanished_holder_expire() {
    let svc = start(config(Duration::from_millis(300))).await.unwrap();
    let mut a = CccClient::connect(svc.tcp_addr, "ccc-a").await.unwrap();
    let s = a.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(a.reply_to(s, WAIT).await.unwrap(), Message::ControlGrant(_)));
    drop(a);

    let mut b = CccClient::connect(svc.tcp_addr, "ccc-b").await.unwrap();
    let s = b.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(b.reply_to(s, WAIT).await.unwrap(), Message::ControlDeny(_)));
    tokio::time::sleep(Duration::from_millis(800)).await;
    let s = b.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(b.reply_to(s, WAIT).await.unwrap(), Message::ControlGrant(_)));
    let audit = svc.hub.audit_log();
    assert!(audit.iter().any(|e| e.ccc == "ccc-a" && matches!(e.action, cage_ccc::hub::AuditAction::Expired)));
    assert!(audit_is_exclusive(&audit));
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn audit_log_is_written_as_ndjson() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.ndjson");
    let svc = start(ServiceConfig { audit_log: Some(path.clone()), ..config(Duration::from_secs(5)) }).await.unwrap();
    let mut a = CccClient::connect(svc.tcp_addr, "ccc-a").await.unwrap();
    let s = a.request("pluto", Action::AcquireControl).await.unwrap();
    a.reply_to(s, WAIT).await.unwrap();
    let s = a.request("pluto", Action::ReleaseControl).await.unwrap();
    a.reply_to(s, WAIT).await.unwrap();
    svc.shutdown().await;
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["what"], "granted");
    assert_eq!(lines[1]["what"], "released");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn websocket_bridge_and_static_ui() {
    let svc = start(config(Duration::from_secs(5))).await.unwrap();
    let http = svc.http_addr.unwrap();

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{http}/ws")).await.unwrap();
    let mut seq = cage_core::wire::Sequencer::new("browser");
    let env = seq.stamp(&Message::CommandRequest(cage_core::wire::CommandRequest::new(Action::AcquireControl)), "pluto");
    ws.send(tokio_tungstenite::tungstenite::Message::text(serde_json::to_string(&env).unwrap())).await.unwrap();
    let reply = tokio::time::timeout(WAIT, ws.next()).await.unwrap().unwrap().unwrap();
    let env: Envelope = serde_json::from_str(reply.to_text().unwrap()).unwrap();
    assert!(matches!(env.decode().unwrap(), Some(Message::ControlGrant(g)) if g.holder == "browser"));

    let mut raw = tokio::net::TcpStream::connect(http).await.unwrap();
    raw.write_all(b"GET / HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    raw.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("/ws"));
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn narrowing_leg_driven_through_the_service() {
    let svc = start(config(Duration::from_secs(5))).await.unwrap();
    let vehicle = tokio::spawn(run_vehicle(agent(svc.tcp_addr, "5", Some(25.0))));
    let mut ccc = CccClient::connect(svc.tcp_addr, "ccc-a").await.unwrap();
    let s = ccc.request("pluto", Action::AcquireControl).await.unwrap();
    assert!(matches!(ccc.reply_to(s, WAIT).await.unwrap(), Message::ControlGrant(_)));
    ccc.request("pluto", Action::Subscribe).await.unwrap();

    ccc.recv_until(WAIT, |_, m| match m {
        Message::StateUpdate(u) if u.driving_mode == DrivingMode::EmergencyStop && u.tick > 20 && u.speed < 1e-3 => Some(()),
        _ => None,
    })
    .await
    .unwrap();
    let s = ccc.request("pluto", Action::SetDrivingMode { driving_mode: DrivingMode::LimitedAutonomousDriving }).await.unwrap();
    match ccc.reply_to(s, WAIT).await.unwrap() {
        Message::CommandAck(ack) => {
            assert!(ack.accepted);
            assert_eq!(ack.resulting_state.unwrap().driving_mode, DrivingMode::LimitedAutonomousDriving);
        }
        other => panic!("unexpected reply {other:?}"),
    }
    ccc.recv_until(WAIT, |_, m| match m {
        Message::DestinationList(l) => {
            l.destinations.iter().any(|d| d.id == "meeting-1" && d.status == DestinationStatus::Reached).then_some(())
        }
        _ => None,
    })
    .await
    .unwrap();
    assert_eq!(svc.hub.latest("pluto").unwrap().mission_state, MissionState::Completed);
    let report = vehicle.await.unwrap().unwrap();
    assert!(cage_sim::log::contains_subsequence(&report.log, &["mode:ES", "estop:clear zone occupied", "mode:LA", "reached:meeting-1"]));
    svc.shutdown().await;
}
