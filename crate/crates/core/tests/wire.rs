use cage_core::mode::{CageMode, DrivingMode};
use cage_core::wire::*;
use serde_json::json;

#[test]
fn command_request_round_trip() {
    let msg = Message::CommandRequest(CommandRequest::new(Action::SetDrivingMode { driving_mode: DrivingMode::LimitedAutonomousDriving }));
    let mut seq = Sequencer::new("ccc-a");
    let env = seq.stamp(&msg, "pluto");
    assert_eq!(env.sequence, 1);
    assert_eq!(
        env.payload,
        json!({"action": "SetDrivingMode", "Driving Mode": "Limited Autonomous Driving", "requester_has_control": false})
    );
    let back = Envelope::from_bytes(&env.to_bytes()).unwrap();
    assert_eq!(back.decode().unwrap(), Some(msg));
    assert_eq!(seq.stamp(&Message::Teleop(Teleop { steering: 0.0, throttle: 0.0 }), "pluto").sequence, 2);
}

#[test]
fn unknown_kind_is_skipped() {
    let env =
        Envelope { version: 1, kind: "Telemetry2".into(), vehicle_id: "v".into(), sender: "s".into(), sequence: 9, payload: json!({}) };
    assert_eq!(env.decode().unwrap(), None);
}

#[test]
fn version_mismatch_rejected() {
    let raw = br#"{"version":2,"kind":"Teleop","vehicle_id":"v","sender":"s","sequence":1,"payload":{}}"#;
    assert!(matches!(Envelope::from_bytes(raw), Err(WireError::Version(2))));
}

#[test]
fn framing_is_length_prefixed() {
    let env = Envelope::new(&Message::Teleop(Teleop { steering: 0.1, throttle: 0.5 }), "v", "s", 3);
    let mut buf = Vec::new();
    write_frame(&mut buf, &env).unwrap();
    write_frame(&mut buf, &env).unwrap();
    let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    assert_eq!(&buf[4..4 + len], env.to_bytes().as_slice());
    let mut r = buf.as_slice();
    assert_eq!(read_frame(&mut r).unwrap(), Some(env.clone()));
    assert_eq!(read_frame(&mut r).unwrap(), Some(env));
    assert_eq!(read_frame(&mut r).unwrap(), None);
}

#[test]
fn relayed_fragment_carries_rights() {
    let mut req = CommandRequest::new(Action::SetCageMode { cage_mode: CageMode::On });
    req.requester_has_control = true;
    req.command_id = Some(17);
    let f = req.fragment().unwrap();
    assert_eq!((f.cage_request, f.requester_has_control, f.command_id), (Some(CageMode::On), true, Some(17)));
    assert_eq!(CommandRequest::new(Action::AcquireControl).fragment(), None);
}
