use cage_ccc::fleet::FleetConfig;
use cage_ccc::hub::*;
use cage_core::mode::DrivingMode;
use cage_core::wire::{Action, CommandRequest, Envelope, Message};
use std::time::{Duration, Instant};
use tokio::sync::mpsc;

fn hub() -> Hub {
    let fleet = FleetConfig::single("pluto");
    Hub::new(HubConfig { holder_timeout: Duration::from_millis(50), ..Default::default() }, &fleet)
}

fn request(ccc: &str, seq: u64, action: Action) -> Envelope {
    Envelope::new(&Message::CommandRequest(CommandRequest::new(action)), "pluto", ccc, seq)
}

fn drain(rx: &mut mpsc::Receiver<Envelope>) -> Vec<Message> {
    std::iter::from_fn(|| rx.try_recv().ok()).map(|e| e.decode().unwrap().unwrap()).collect()
}

#[test]
fn acquire_release_transfer() {
    let hub = hub();
    let (a, mut ra) = hub.connect();
    let (b, mut rb) = hub.connect();
    hub.handle(a, request("ccc-a", 1, Action::AcquireControl));
    hub.handle(b, request("ccc-b", 1, Action::AcquireControl));
    assert!(matches!(drain(&mut ra)[..], [Message::ControlGrant(_)]));
    match &drain(&mut rb)[..] {
        [Message::ControlDeny(d)] => assert_eq!(d.holder.as_deref(), Some("ccc-a")),
        other => panic!("{other:?}"),
    }
    hub.handle(a, request("ccc-a", 2, Action::AcquireControl));
    assert!(matches!(drain(&mut ra)[..], [Message::ControlDeny(_)]));
    hub.handle(a, request("ccc-a", 3, Action::ReleaseControl));
    hub.handle(b, request("ccc-b", 2, Action::AcquireControl));
    assert!(matches!(drain(&mut rb)[..], [Message::ControlGrant(_)]));
    assert_eq!(hub.holder("pluto").as_deref(), Some("ccc-b"));
    assert!(audit_is_exclusive(&hub.audit_log()));
}

#[test]
fn unknown_vehicle_denied() {
    let hub = Hub::new(HubConfig { allow_unlisted: false, ..Default::default() }, &FleetConfig::default());
    let (a, mut ra) = hub.connect();
    hub.handle(a, request("ccc-a", 1, Action::AcquireControl));
    match &drain(&mut ra)[..] {
        [Message::ControlDeny(d)] => assert_eq!(d.reason, "unknown vehicle"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn non_holder_commands_are_not_relayed() {
    let hub = hub();
    let (veh, mut rv) = hub.connect();
    hub.handle(veh, request("pluto", 1, Action::RegisterVehicle));
    let (a, _ra) = hub.connect();
    let (b, mut rb) = hub.connect();
    hub.handle(a, request("ccc-a", 1, Action::AcquireControl));
    hub.handle(b, request("ccc-b", 1, Action::SetDrivingMode { driving_mode: DrivingMode::FullyAutonomousDriving }));
    match &drain(&mut rb)[..] {
        [Message::CommandAck(ack)] => assert!(!ack.accepted),
        other => panic!("{other:?}"),
    }
    hub.handle(a, request("ccc-a", 2, Action::SetDrivingMode { driving_mode: DrivingMode::EmergencyStop }));
    let relayed: Vec<_> =
        drain(&mut rv).into_iter().filter_map(|m| if let Message::CommandRequest(r) = m { Some(r) } else { None }).collect();
    assert_eq!(relayed.len(), 1);
    assert_eq!(relayed[0].requester.as_deref(), Some("ccc-a"));
    assert!(relayed[0].requester_has_control);
}

#[test]
fn orphaned_rights_expire() {
    let hub = hub();
    let (a, _ra) = hub.connect();
    hub.handle(a, request("ccc-a", 1, Action::AcquireControl));
    hub.disconnect(a);
    hub.sweep(Instant::now());
    assert_eq!(hub.holder("pluto").as_deref(), Some("ccc-a"));
    std::thread::sleep(Duration::from_millis(60));
    hub.sweep(Instant::now());
    assert_eq!(hub.holder("pluto"), None);
    assert!(audit_is_exclusive(&hub.audit_log()));
}

#[test]
fn slow_consumer_is_disconnected() {
    let hub = hub();
    let (veh, _rv) = hub.connect();
    hub.handle(veh, request("pluto", 1, Action::RegisterVehicle));
    let (ui, _rui) = hub.connect();
    hub.handle(ui, request("ui", 1, Action::Subscribe));
    let scenario = cage_sim::Scenario::builtin("2").unwrap();
    let mut sim = cage_sim::Simulation::new(&scenario, &cage_sim::SimOptions::default()).unwrap();
    let out = sim.step(None);
    let update = sim.state_update(&out.report);
    for k in 0..300 {
        hub.handle(veh, Envelope::new(&Message::StateUpdate(Box::new(update.clone())), "pluto", "pluto", k + 2));
    }
    assert!(!hub.is_connected(ui));
    assert!(hub.is_connected(veh));
}
