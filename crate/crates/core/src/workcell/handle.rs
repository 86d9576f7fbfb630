//! Single-owner world actor.
//!
//! The world lives on its own thread; every mutation arrives as a boxed closure
//! over a channel, so concurrent users (orchestrator, robot server, gateway)
//! observe one serial order of changes.

use std::sync::mpsc;
use std::thread;

use crate::catalog::ComponentId;

use super::robot_sim::WorldAccess;
use super::world::{WorldError, WorldState};

type Job = Box<dyn FnOnce(&mut WorldState) + Send>;

#[derive(Debug, Clone)]
pub struct WorldHandle {
    tx: mpsc::Sender<Job>,
}

impl WorldHandle {
    /// Moves `world` onto a fresh actor thread. The thread exits once every
    /// handle is dropped.
    pub fn spawn(world: WorldState) -> Self {
        let (tx, rx) = mpsc::channel::<Job>();
        thread::Builder::new()
            .name("world".into())
            .spawn(move || {
                let mut world = world;
                for job in rx {
                    job(&mut world);
                }
            })
            .expect("spawn world thread");
        Self { tx }
    }

    /// Runs `f` on the world and waits for its result.
    pub fn with<R, F>(&self, f: F) -> R
    where
        R: Send + 'static,
        F: FnOnce(&mut WorldState) -> R + Send + 'static,
    {
        let (reply_tx, reply_rx) = mpsc::sync_channel(1);
        self.tx
            .send(Box::new(move |w| {
                let _ = reply_tx.send(f(w));
            }))
            .expect("world actor alive while a handle exists");
        reply_rx.recv().expect("world actor replies")
    }

    pub fn snapshot(&self) -> WorldState {
        self.with(|w| w.clone())
    }

    pub fn replace(&self, world: WorldState) {
        self.with(move |w| *w = world)
    }

    pub fn set_clock(&self, clock: f64) {
        self.with(move |w| w.clock = clock)
    }
}

impl WorldAccess for WorldHandle {
    fn robot_pick(&mut self, c: ComponentId) -> Result<(), WorldError> {
        self.with(move |w| w.robot_pick(c))
    }

    fn robot_place(&mut self, c: ComponentId) -> Result<(), WorldError> {
        self.with(move |w| w.robot_place(c))
    }
}
