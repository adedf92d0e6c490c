use std::collections::{BTreeMap, HashMap};

use super::{DataflowError, Operator, OperatorId, StreamId, TypeTag};

/// Declaration of one operator: identity, typed inputs/outputs and callbacks.
pub struct OperatorSpec {
    pub(crate) id: OperatorId,
    pub(crate) inputs: Vec<(StreamId, TypeTag)>,
    pub(crate) outputs: Vec<(StreamId, TypeTag)>,
    pub(crate) operator: Box<dyn Operator>,
}

impl OperatorSpec {
    pub fn new(id: impl Into<String>, operator: impl Operator + 'static) -> Self {
        OperatorSpec {
            id: OperatorId(id.into()),
            inputs: Vec::new(),
            outputs: Vec::new(),
            operator: Box::new(operator),
        }
    }

    /// Declares that this operator reads `stream`, carrying `T`.
    pub fn input<T: 'static>(mut self, stream: &str) -> Self {
        self.inputs.push((StreamId::from(stream), TypeTag::of::<T>()));
        self
    }

    /// Declares that this operator is the sender of `stream`, carrying `T`.
    pub fn output<T: 'static>(mut self, stream: &str) -> Self {
        self.outputs.push((StreamId::from(stream), TypeTag::of::<T>()));
        self
    }

    pub fn id(&self) -> &OperatorId {
        &self.id
    }
}

#[derive(Clone, Debug)]
pub(crate) struct StreamInfo {
    pub tag: TypeTag,
    pub sender: OperatorId,
    pub receivers: Vec<OperatorId>,
}

/// A directed graph of operators. Every stream has exactly one sender.
#[derive(Default)]
pub struct Graph {
    pub(crate) operators: Vec<OperatorSpec>,
    pub(crate) index: HashMap<OperatorId, usize>,
    pub(crate) streams: BTreeMap<StreamId, StreamInfo>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(&OperatorId::from(id))
    }

    /// Receivers of `stream`, in subscription order.
    pub fn receivers(&self, stream: &str) -> Option<&[OperatorId]> {
        self.streams.get(&StreamId::from(stream)).map(|s| s.receivers.as_slice())
    }

    /// `(sender, receiver)` pairs for every wired stream.
    pub fn edges(&self) -> Vec<(OperatorId, StreamId, OperatorId)> {
        self.streams
            .iter()
            .flat_map(|(sid, info)| {
                info.receivers
                    .iter()
                    .map(move |r| (info.sender.clone(), sid.clone(), r.clone()))
            })
            .collect()
    }

    /// Registers an operator. Inputs whose stream already exists are wired
    /// immediately, as are existing operators waiting on this one's outputs.
    pub fn add_operator(&mut self, spec: OperatorSpec) -> Result<&mut Self, DataflowError> {
        if self.index.contains_key(&spec.id) {
            return Err(DataflowError::DuplicateOperator(spec.id));
        }
        for (stream, _) in &spec.outputs {
            if self.streams.contains_key(stream) {
                return Err(DataflowError::DuplicateStream(stream.clone()));
            }
        }
        // type-check every wire before mutating anything
        for (stream, tag) in &spec.inputs {
            if let Some(info) = self.streams.get(stream) {
                check_tag(stream, *tag, info.tag)?;
            }
        }
        for (stream, tag) in &spec.outputs {
            for other in &self.operators {
                if let Some((_, expected)) = other.inputs.iter().find(|(s, _)| s == stream) {
                    check_tag(stream, *expected, *tag)?;
                }
            }
        }

        for (stream, tag) in &spec.outputs {
            let receivers = self
                .operators
                .iter()
                .filter(|o| o.inputs.iter().any(|(s, _)| s == stream))
                .map(|o| o.id.clone())
                .collect();
            self.streams.insert(
                stream.clone(),
                StreamInfo { tag: *tag, sender: spec.id.clone(), receivers },
            );
        }
        for (stream, _) in &spec.inputs {
            if let Some(info) = self.streams.get_mut(stream) {
                if !info.receivers.contains(&spec.id) {
                    info.receivers.push(spec.id.clone());
                }
            }
        }
        self.index.insert(spec.id.clone(), self.operators.len());
        self.operators.push(spec);
        Ok(self)
    }

    /// Subscribes `to_op` to `stream`, which `from_op` sends. Idempotent.
    pub fn connect(&mut self, from_op: &str, stream: &str, to_op: &str) -> Result<&mut Self, DataflowError> {
        let from = OperatorId::from(from_op);
        let to = OperatorId::from(to_op);
        let sid = StreamId::from(stream);
        if !self.index.contains_key(&from) {
            return Err(DataflowError::UnknownOperator(from));
        }
        let Some(&to_idx) = self.index.get(&to) else {
            return Err(DataflowError::UnknownOperator(to));
        };
        let info = self.streams.get(&sid).filter(|i| i.sender == from).ok_or_else(|| {
            DataflowError::NotASender { op: from.clone(), stream: sid.clone() }
        })?;
        let expected = self.operators[to_idx]
            .inputs
            .iter()
            .find(|(s, _)| *s == sid)
            .map(|(_, t)| *t)
            .ok_or_else(|| DataflowError::NotAnInput { op: to.clone(), stream: sid.clone() })?;
        check_tag(&sid, expected, info.tag)?;
        let info = self.streams.get_mut(&sid).expect("checked above");
        if !info.receivers.contains(&to) {
            info.receivers.push(to);
        }
        Ok(self)
    }

    /// Every declared input must have a sender.
    pub fn validate(&self) -> Result<(), DataflowError> {
        for op in &self.operators {
            for (stream, _) in &op.inputs {
                if !self.streams.contains_key(stream) {
                    return Err(DataflowError::DanglingInput { op: op.id.clone(), stream: stream.clone() });
                }
            }
        }
        Ok(())
    }
}

fn check_tag(stream: &StreamId, expected: TypeTag, found: TypeTag) -> Result<(), DataflowError> {
    if expected == found {
        Ok(())
    } else {
        Err(DataflowError::TypeMismatch { stream: stream.clone(), expected: expected.name(), found: found.name() })
    }
}
