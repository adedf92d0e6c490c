use std::any::Any;
use std::fmt;

use crate::dataflow::{LogicalTimestamp, Payload, TypeTag};
use crate::netsim::{BandwidthModel, CloudService};
use crate::time::{Instant, Span};

use super::queue::{OutboundQueue, DEFAULT_DEPTH_THRESHOLD};
use super::Priority;

/// A response scheduled by a cloud endpoint, `delay` after the request left the uplink.
#[derive(Debug, Clone)]
pub struct CloudReply {
    pub delay: Span,
    pub payload: Payload,
}

/// Remote endpoint reachable from an operator.
pub trait CloudHandle: Send {
    fn name(&self) -> &str;

    /// Type of request messages the endpoint accepts.
    fn request_type(&self) -> TypeTag;

    fn request_bytes(&self, _request: &Payload) -> usize {
        0
    }

    /// Sends `request` (which left the uplink at `departs`). `Ok(None)` means
    /// the response is lost.
    fn invoke(&mut self, request: &Payload, departs: Instant) -> Result<Option<CloudReply>, String>;
}

type Responder<Req, Resp> = Box<dyn FnMut(&Req) -> Resp + Send>;

/// Endpoint backed by a [`CloudService`] model: the response is computed
/// in-process and delivered after `runtime + rtt`.
pub struct SimulatedCloud<Req, Resp> {
    service: CloudService,
    request_bytes: usize,
    respond: Responder<Req, Resp>,
    draws: u64,
}

impl<Req, Resp> SimulatedCloud<Req, Resp>
where
    Req: Any + Send + Sync,
    Resp: Any + Send + Sync,
{
    pub fn new(service: CloudService, respond: impl FnMut(&Req) -> Resp + Send + 'static) -> Self {
        SimulatedCloud { service, request_bytes: 0, respond: Box::new(respond), draws: 0 }
    }

    pub fn with_request_bytes(mut self, bytes: usize) -> Self {
        self.request_bytes = bytes;
        self
    }

    pub fn service(&self) -> &CloudService {
        &self.service
    }
}

impl<Req, Resp> CloudHandle for SimulatedCloud<Req, Resp>
where
    Req: Any + Send + Sync,
    Resp: Any + Send + Sync,
{
    fn name(&self) -> &str {
        &self.service.name
    }

    fn request_type(&self) -> TypeTag {
        TypeTag::of::<Req>()
    }

    fn request_bytes(&self, _request: &Payload) -> usize {
        self.request_bytes
    }

    fn invoke(&mut self, request: &Payload, _departs: Instant) -> Result<Option<CloudReply>, String> {
        let req = request
            .get::<Req>()
            .ok_or_else(|| format!("{} expects {}", self.service.name, std::any::type_name::<Req>()))?;
        let draw = self.draws;
        self.draws += 1;
        let delay_ms = self.service.response_delay_ms(draw).map_err(|e| e.to_string())?;
        if !delay_ms.is_finite() {
            return Ok(None);
        }
        let payload = Payload::new((self.respond)(req));
        Ok(Some(CloudReply { delay: Span::from_ms(delay_ms), payload }))
    }
}

/// `(input_message, timestamp) -> Optional[(output_message, relative_deadline_ms)]`
pub type MsgHandler = Box<dyn FnMut(&Payload, LogicalTimestamp) -> Result<Option<(Payload, f64)>, String> + Send>;

/// A cloud implementation attached to an operator.
pub struct CloudRegistration {
    pub handle: Box<dyn CloudHandle>,
    pub priority: Priority,
    pub msg_handler: MsgHandler,
    pub queue: OutboundQueue,
}

impl CloudRegistration {
    /// Builds a registration from a typed handler. The handler returns the
    /// request to send and its deadline in milliseconds, or `None` to skip
    /// this message.
    pub fn new<In, Out>(
        handle: impl CloudHandle + 'static,
        priority: i32,
        mut handler: impl FnMut(&In, LogicalTimestamp) -> Option<(Out, f64)> + Send + 'static,
    ) -> Self
    where
        In: Any,
        Out: Any + Send + Sync,
    {
        let msg_handler: MsgHandler = Box::new(move |payload, t| {
            let input = payload
                .get::<In>()
                .ok_or_else(|| format!("handler expects {}", std::any::type_name::<In>()))?;
            Ok(handler(input, t).map(|(out, d)| (Payload::new(out), d)))
        });
        CloudRegistration {
            handle: Box::new(handle),
            priority: Priority::new(priority),
            msg_handler,
            queue: OutboundQueue::new(DEFAULT_DEPTH_THRESHOLD, BandwidthModel::unlimited()),
        }
    }

    pub fn with_queue(mut self, queue: OutboundQueue) -> Self {
        self.queue = queue;
        self
    }

    pub fn type_tag(&self) -> TypeTag {
        self.handle.request_type()
    }
}

impl fmt::Debug for CloudRegistration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CloudRegistration")
            .field("handle", &self.handle.name())
            .field("priority", &self.priority)
            .finish_non_exhaustive()
    }
}
