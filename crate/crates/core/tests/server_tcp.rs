use std::net::SocketAddr;
use std::thread;
use std::time::{Duration, Instant};

use telerobot::latency::{ping, EchoLink, TcpEchoLink};
use telerobot::protocol::{HostDirection, UserStatus, WireJoints, WireMessage};
use telerobot::server::{EngineConfig, TcpServer};
use telerobot::ArmConfig;
use tokio::sync::oneshot;

const WAIT: Duration = Duration::from_secs(5);

struct Running {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl Running {
    fn stop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Arm ten times faster than the default so cycles take a fraction of a second.
fn fast_engine() -> EngineConfig {
    let mut arm = ArmConfig::default();
    arm.speeds = [300.0; 5];
    EngineConfig {
        arm,
        ..EngineConfig::default()
    }
}

fn start(cfg: EngineConfig) -> Running {
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let thread = thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let server = TcpServer::from_listener(listener, cfg);
            addr_tx.send(server.local_addr().unwrap()).unwrap();
            server
                .run(async {
                    let _ = stop_rx.await;
                })
                .await
                .unwrap();
        });
    });
    Running {
        addr: addr_rx.recv().unwrap(),
        stop: Some(stop_tx),
        thread: Some(thread),
    }
}

fn next(link: &mut TcpEchoLink) -> WireMessage {
    link.recv_frame(WAIT).unwrap().expect("frame before timeout")
}

/// Reads until `pred` matches, returning everything read.
fn until(link: &mut TcpEchoLink, pred: impl Fn(&WireMessage) -> bool) -> Vec<WireMessage> {
    let deadline = Instant::now() + WAIT;
    let mut seen = Vec::new();
    while Instant::now() < deadline {
        if let Some(m) = link.recv_frame(Duration::from_millis(100)).unwrap() {
            let done = pred(&m);
            seen.push(m);
            if done {
                return seen;
            }
        }
    }
    panic!("condition not met; saw {seen:?}");
}

fn join(r: &Running) -> (TcpEchoLink, String) {
    let mut link = TcpEchoLink::connect(r.addr).unwrap();
    let WireMessage::Handshake(h) = next(&mut link) else {
        panic!("first frame must be the handshake");
    };
    until(&mut link, |m| matches!(m, WireMessage::ClientCount(_)));
    (link, h.client)
}

fn terminal_for(seen: &[WireMessage], me: &str) -> Option<WireJoints> {
    seen.windows(2).find_map(|w| match w {
        [WireMessage::UserStatus { client, status: UserStatus::Active }, WireMessage::Feedback { joints, reached: true }]
            if client == me =>
        {
            Some(*joints)
        }
        _ => None,
    })
}

#[test]
fn starts_and_stops() {
    let mut r = start(EngineConfig::default());
    r.stop();
}

#[test]
fn connect_sees_handshake_join_and_count() {
    let r = start(EngineConfig::default());
    let mut link = TcpEchoLink::connect(r.addr).unwrap();
    let WireMessage::Handshake(h) = next(&mut link) else {
        panic!()
    };
    assert_eq!(h, telerobot::protocol::Handshake::for_arm(h.client.clone(), &ArmConfig::default()));
    assert!(matches!(next(&mut link), WireMessage::HostEvent { direction: HostDirection::Join, .. }));
    assert_eq!(next(&mut link), WireMessage::ClientCount(1));
}

#[test]
fn ping_answered() {
    let r = start(EngineConfig::default());
    let (mut link, _) = join(&r);
    let rtt = ping(&mut link, 42, WAIT).unwrap();
    assert!(rtt < Duration::from_secs(1));
}

#[test]
fn cycle_and_lockstep_over_tcp() {
    let r = start(fast_engine());
    let (mut link, me) = join(&r);
    link.send_frame(&WireMessage::Setpoint(WireJoints([450, 0, 0, 0, 0]))).unwrap();
    link.send_frame(&WireMessage::Setpoint(WireJoints([100, 0, 0, 0, 0]))).unwrap();
    let seen = until(&mut link, |m| matches!(m, WireMessage::Feedback { reached: true, .. }));
    assert!(seen.contains(&WireMessage::error("LOCKSTEP", "outstanding_command")));
    assert_eq!(terminal_for(&seen, &me), Some(WireJoints([450, 0, 0, 0, 0])));
}

#[test]
fn three_clients_served_in_order() {
    let r = start(fast_engine());
    let mut links: Vec<(TcpEchoLink, String)> = (0..3).map(|_| join(&r)).collect();
    for (link, _) in links.iter_mut() {
        // drain roster updates for later joiners
        while link.recv_frame(Duration::from_millis(50)).unwrap().is_some() {}
    }
    for (k, (link, _)) in links.iter_mut().enumerate() {
        let a = 100 * (k as i32 + 1);
        link.send_frame(&WireMessage::Setpoint(WireJoints([a, 0, 0, 0, 0]))).unwrap();
        thread::sleep(Duration::from_millis(20));
    }
    // everyone sees the same broadcast stream; use the first client's view
    let ids: Vec<String> = links.iter().map(|(_, id)| id.clone()).collect();
    let last = ids[2].clone();
    let seen = until(&mut links[0].0, |m| {
        matches!(m, WireMessage::UserStatus { client, status: UserStatus::Idle } if *client == last)
    });
    let order: Vec<&str> = seen
        .windows(2)
        .filter_map(|w| match w {
            [WireMessage::UserStatus { client, status: UserStatus::Active }, WireMessage::Feedback { reached: true, .. }] => {
                Some(client.as_str())
            }
            _ => None,
        })
        .collect();
    assert_eq!(order, ids.iter().map(String::as_str).collect::<Vec<_>>());
}

#[test]
fn killed_owner_releases_the_arm() {
    let r = start(EngineConfig::default());
    let (mut a, _) = join(&r);
    let (mut b, b_id) = join(&r);
    while a.recv_frame(Duration::from_millis(50)).unwrap().is_some() {}
    a.send_frame(&WireMessage::Setpoint(WireJoints([900, 0, 0, 0, 0]))).unwrap();
    until(&mut b, |m| matches!(m, WireMessage::UserStatus { status: UserStatus::Active, .. }));
    b.send_frame(&WireMessage::Setpoint(WireJoints([-100, 0, 0, 0, 0]))).unwrap();
    until(&mut b, |m| matches!(m, WireMessage::UserStatus { status: UserStatus::Queued(1), .. }));
    drop(a);
    let seen = until(&mut b, |m| matches!(m, WireMessage::ClientCount(1)));
    assert!(seen.iter().any(|m| matches!(m, WireMessage::HostEvent { direction: HostDirection::Leave, .. })));
    let seen = until(&mut b, |m| matches!(m, WireMessage::Feedback { reached: true, .. }));
    assert_eq!(terminal_for(&seen, &b_id), Some(WireJoints([-100, 0, 0, 0, 0])));
}

#[test]
fn shutdown_sends_idle_and_closes() {
    let mut r = start(EngineConfig::default());
    let (mut link, me) = join(&r);
    r.stop();
    assert_eq!(
        next(&mut link),
        WireMessage::UserStatus {
            client: me,
            status: UserStatus::Idle
        }
    );
    assert!(link.recv_frame(WAIT).is_err());
}
