//! Who acts at the per-iteration wait point: a simulated policy or a person
//! driving the console.

use std::sync::mpsc;
use std::time::Duration;

use crate::catalog::{ComponentCatalog, ComponentId};
use crate::workcell::{apply_choice, OperatorChoice, OperatorEvent, SimOperator, WorldHandle};

pub trait OperatorSource: Send {
    fn act(
        &mut self,
        world: &WorldHandle,
        recommendation: Option<ComponentId>,
        catalog: &ComponentCatalog,
    ) -> OperatorEvent;
}

impl OperatorSource for SimOperator {
    fn act(
        &mut self,
        world: &WorldHandle,
        recommendation: Option<ComponentId>,
        catalog: &ComponentCatalog,
    ) -> OperatorEvent {
        let current = world.snapshot();
        let choice = self.decide(&current, recommendation);
        let catalog = catalog.clone();
        world.with(move |w| apply_choice(w, choice, &catalog))
    }
}

/// An operator action submitted from outside, with an optional channel for
/// the resulting event.
#[derive(Debug)]
pub struct ConsoleRequest {
    pub choice: OperatorChoice,
    pub reply: Option<mpsc::Sender<OperatorEvent>>,
}

/// Operator actions queued by the gateway and consumed one per wait point.
#[derive(Debug)]
pub struct ConsoleOperator {
    rx: mpsc::Receiver<ConsoleRequest>,
    wait: Option<Duration>,
}

impl ConsoleOperator {
    /// `wait` bounds how long a wait point blocks; `None` waits indefinitely.
    pub fn channel(wait: Option<Duration>) -> (mpsc::Sender<ConsoleRequest>, Self) {
        let (tx, rx) = mpsc::channel();
        (tx, Self { rx, wait })
    }
}

impl OperatorSource for ConsoleOperator {
    fn act(
        &mut self,
        world: &WorldHandle,
        _recommendation: Option<ComponentId>,
        catalog: &ComponentCatalog,
    ) -> OperatorEvent {
        let request = match self.wait {
            Some(d) => self.rx.recv_timeout(d).ok(),
            None => self.rx.recv().ok(),
        };
        let Some(request) = request else {
            return OperatorEvent::NoOp {
                reason: "no operator action received".into(),
            };
        };
        let catalog = catalog.clone();
        let choice = request.choice;
        let event = world.with(move |w| apply_choice(w, choice, &catalog));
        if let Some(reply) = request.reply {
            let _ = reply.send(event.clone());
        }
        event
    }
}
