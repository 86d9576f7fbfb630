use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use assist_core::orchestrator::{JobError, JobReport, RobotDriver};
use assist_core::planner::motion::RobotAction;

use crate::frame::{action_frame, decode, encode, WireFrame};
use crate::LinkError;

pub const DEFAULT_REPLY_TIMEOUT: Duration = Duration::from_secs(10);

enum Reply {
    Ack(f64),
    Nack(String),
    Lost,
    TimedOut,
}

/// Orchestrator-side connection. Commands go out strictly one at a time.
#[derive(Debug)]
pub struct RobotClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    seq: u64,
    shares_world: bool,
}

impl RobotClient {
    /// Connects and performs the `hello` exchange.
    pub fn connect(addr: &str, reply_timeout: Duration) -> Result<Self, LinkError> {
        let unreachable = |source| LinkError::RobotUnreachable {
            addr: addr.to_string(),
            source,
        };
        let sock = addr
            .to_socket_addrs()
            .map_err(unreachable)?
            .next()
            .ok_or_else(|| unreachable(std::io::Error::new(ErrorKind::NotFound, "no address")))?;
        let stream = TcpStream::connect_timeout(&sock, reply_timeout).map_err(unreachable)?;
        stream.set_read_timeout(Some(reply_timeout)).map_err(unreachable)?;
        stream.set_nodelay(true).map_err(unreachable)?;
        let writer = stream.try_clone().map_err(unreachable)?;
        let mut client = Self {
            reader: BufReader::new(stream),
            writer,
            seq: 0,
            shares_world: false,
        };
        client.seq += 1;
        let seq = client.seq;
        match client.round_trip(&WireFrame::Hello { seq }) {
            Reply::Ack(_) => Ok(client),
            Reply::Nack(reason) => Err(LinkError::Refused(reason)),
            Reply::Lost => Err(LinkError::Protocol("connection closed during hello".into())),
            Reply::TimedOut => Err(LinkError::Protocol("no reply to hello".into())),
        }
    }

    /// Declares that the controller acts on the orchestrator's own world
    /// handle, so deliveries must not be mirrored.
    pub fn with_shared_world(mut self, shared: bool) -> Self {
        self.shares_world = shared;
        self
    }

    pub fn last_seq(&self) -> u64 {
        self.seq
    }

    fn round_trip(&mut self, frame: &WireFrame) -> Reply {
        let want = frame.seq().expect("commands carry seq");
        if self.writer.write_all(encode(frame).as_bytes()).is_err() {
            return Reply::Lost;
        }
        let mut line = String::new();
        loop {
            line.clear();
            match self.reader.read_line(&mut line) {
                Ok(0) => return Reply::Lost,
                Ok(_) => {}
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    return Reply::TimedOut
                }
                Err(_) => return Reply::Lost,
            }
            match decode(&line) {
                Ok(WireFrame::Status { .. }) => continue,
                Ok(WireFrame::Ack { seq, elapsed_s }) if seq == want => return Reply::Ack(elapsed_s),
                Ok(WireFrame::Nack { seq, reason }) if seq == want => return Reply::Nack(reason),
                Ok(other) => {
                    tracing::warn!(?other, want, "unexpected frame from robot");
                    continue;
                }
                Err(e) => {
                    tracing::warn!(%e, "undecodable line from robot");
                    continue;
                }
            }
        }
    }
}

impl RobotDriver for RobotClient {
    fn send_job(&mut self, actions: &[RobotAction]) -> Result<JobReport, JobError> {
        let mut report = JobReport::default();
        for action in actions {
            self.seq += 1;
            let seq = self.seq;
            match self.round_trip(&action_frame(seq, action)) {
                Reply::Ack(dt) => {
                    report.completed += 1;
                    report.elapsed_s += dt;
                }
                Reply::Nack(reason) => return Err(JobError::NackReceived { seq, reason, report }),
                Reply::Lost => return Err(JobError::ConnectionLost { report }),
                Reply::TimedOut => return Err(JobError::Timeout { seq, report }),
            }
        }
        Ok(report)
    }

    fn shares_world(&self) -> bool {
        self.shares_world
    }
}
