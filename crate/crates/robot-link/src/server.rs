use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use assist_core::catalog::ComponentCatalog;
use assist_core::planner::motion::MagazineLayout;
use assist_core::workcell::{RobotSimState, WorldHandle};

use crate::frame::{decode, encode, WireFrame};
use crate::LinkError;

/// Running simulated controller. Dropping it stops accepting connections.
#[derive(Debug)]
pub struct RobotServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    sim: Arc<Mutex<RobotSimState>>,
    accept: Option<JoinHandle<()>>,
}

impl RobotServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Copy of the simulated arm's current state.
    pub fn sim_state(&self) -> RobotSimState {
        self.sim.lock().expect("sim lock").clone()
    }

    /// Blocks until the accept loop exits (it runs until `shutdown`).
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // Wake the blocking accept.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for RobotServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

struct Shared {
    world: WorldHandle,
    sim: Arc<Mutex<RobotSimState>>,
    layout: MagazineLayout,
    catalog: ComponentCatalog,
    busy: AtomicBool,
}

/// Binds `addr` and serves one orchestrator at a time against `world`.
pub fn serve_simulated_robot(
    addr: &str,
    world: WorldHandle,
    sim: RobotSimState,
    layout: MagazineLayout,
    catalog: ComponentCatalog,
) -> Result<RobotServer, LinkError> {
    let bind_err = |source| LinkError::BindFailure {
        addr: addr.to_string(),
        source,
    };
    let listener = TcpListener::bind(addr).map_err(bind_err)?;
    let local = listener.local_addr().map_err(bind_err)?;
    let sim = Arc::new(Mutex::new(sim));
    let shared = Arc::new(Shared {
        world,
        sim: Arc::clone(&sim),
        layout,
        catalog,
        busy: AtomicBool::new(false),
    });
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let accept = thread::Builder::new()
        .name("robot-accept".into())
        .spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let shared = Arc::clone(&shared);
                if shared.busy.swap(true, Ordering::SeqCst) {
                    thread::spawn(move || refuse_busy(stream));
                } else {
                    thread::spawn(move || {
                        if let Err(e) = serve_connection(&shared, stream) {
                            tracing::debug!(%e, "robot connection ended");
                        }
                        shared.busy.store(false, Ordering::SeqCst);
                    });
                }
            }
        })
        .expect("spawn accept thread");
    tracing::info!(%local, "simulated robot listening");
    Ok(RobotServer {
        addr: local,
        stop,
        sim,
        accept: Some(accept),
    })
}

fn refuse_busy(stream: TcpStream) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    let Ok(mut writer) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    let seq = match reader.read_line(&mut line) {
        Ok(n) if n > 0 => decode(&line).ok().and_then(|f| f.seq()).unwrap_or(0),
        _ => 0,
    };
    let _ = writer.write_all(
        encode(&WireFrame::Nack {
            seq,
            reason: "busy".into(),
        })
        .as_bytes(),
    );
    let _ = writer.shutdown(Shutdown::Both);
}

fn serve_connection(shared: &Shared, stream: TcpStream) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut greeted = false;
    let mut last_seq = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let frame = match decode(&line) {
            Ok(f) => f,
            Err(_) => {
                send(&mut writer, nack(0, "parse_error"))?;
                continue;
            }
        };
        let Some(seq) = frame.seq().filter(|_| frame.is_command()) else {
            send(&mut writer, nack(frame.seq().unwrap_or(0), "unexpected_frame"))?;
            continue;
        };
        if seq <= last_seq {
            send(&mut writer, nack(seq, "stale_seq"))?;
            continue;
        }
        last_seq = seq;
        if let WireFrame::Hello { .. } = frame {
            greeted = true;
            send(&mut writer, WireFrame::Ack { seq, elapsed_s: 0.0 })?;
            continue;
        }
        if !greeted {
            send(&mut writer, nack(seq, "no_hello"))?;
            continue;
        }
        let action = frame.to_action().expect("command frame");
        let mut world = shared.world.clone();
        let (reply, status) = {
            let mut sim = shared.sim.lock().expect("sim lock");
            let reply = match sim.execute(&action, &shared.layout, &shared.catalog, &mut world) {
                Ok(dt) => WireFrame::Ack { seq, elapsed_s: dt },
                Err(fault) => nack(seq, fault.reason()),
            };
            let status = (!action.is_move()).then(|| WireFrame::Status {
                position: sim.pose.position,
                orientation: sim.pose.orientation,
                gripper: sim.gripper,
                held: sim.held,
            });
            (reply, status)
        };
        send(&mut writer, reply)?;
        if let Some(s) = status {
            send(&mut writer, s)?;
        }
    }
}

fn nack(seq: u64, reason: &str) -> WireFrame {
    WireFrame::Nack {
        seq,
        reason: reason.to_string(),
    }
}

fn send(w: &mut TcpStream, frame: WireFrame) -> std::io::Result<()> {
    w.write_all(encode(&frame).as_bytes())
}
