use std::collections::BTreeSet;
use std::sync::Arc;

use crate::aggregator::{Address, AuthorityAgent, ConsumerClient, Context, Message, SourceAgent};
use crate::identity::Did;
use crate::storage::{LocationStore, SelfHostedStore, StagingSpace};

/// One participant: any combination of consumer, source and authority roles
/// under a single DID.
#[derive(Debug)]
pub struct EntityActor {
    pub name: String,
    pub did: Did,
    pub consumer: Option<ConsumerClient>,
    pub source: Option<SourceAgent>,
    pub authority: Option<AuthorityAgent>,
}

impl EntityActor {
    fn handle(&mut self, from: &Address, port: &str, msg: Message, ctx: &mut dyn Context) {
        match &msg {
            Message::AuthorizationRequest { .. } => {
                if let Some(a) = &mut self.authority {
                    a.handle(from, msg, ctx);
                }
            }
            Message::Delivery { .. } | Message::StageData { .. } | Message::Abort { .. } => {
                if let Some(c) = &mut self.consumer {
                    c.handle(port, msg, ctx);
                }
            }
            _ => {
                if let Some(s) = &mut self.source {
                    s.handle(msg, ctx);
                }
            }
        }
    }

    fn tick(&mut self, idle: u32, ctx: &mut dyn Context) {
        if let Some(c) = &mut self.consumer {
            c.on_tick(idle, ctx);
        }
        if let Some(s) = &mut self.source {
            s.on_tick(idle, ctx);
        }
    }
}

/// A storage location serving partitions by handle.
#[derive(Debug)]
pub struct LocationActor {
    pub store: Arc<LocationStore>,
    /// Keys of partitions that were encrypted before upload.
    pub sealed: BTreeSet<String>,
}

/// The public staging space.
#[derive(Debug)]
pub struct StagingActor {
    pub space: Arc<StagingSpace>,
}

/// A self-hosted data server.
#[derive(Debug)]
pub struct HostActor {
    pub store: Arc<SelfHostedStore>,
}

#[derive(Debug)]
pub enum Node {
    Entity(Box<EntityActor>),
    Location(LocationActor),
    Staging(StagingActor),
    Host(HostActor),
}

impl Node {
    /// Storage services answer on the channel the request came in on, tagged
    /// with the request's step.
    pub fn handle(&mut self, from: &Address, port: &str, step: u8, msg: Message, ctx: &mut dyn Context) {
        match self {
            Node::Entity(e) => e.handle(from, port, msg, ctx),
            Node::Location(l) => {
                if let Message::FetchPartition { run, index, handle } = msg {
                    let bytes = l.store.get(handle.key());
                    let sealed = l.sealed.contains(handle.key());
                    ctx.send(from, port, Message::PartitionData { run, index, bytes, sealed }, step);
                }
            }
            Node::Staging(s) => match msg {
                Message::StagePut { run, bytes } => {
                    let address = s.space.put(&bytes).ok();
                    ctx.send(from, port, Message::StageAck { run, address }, step);
                }
                Message::StageGet { run, source, address } => {
                    let bytes = s.space.get(&address).ok();
                    ctx.send(from, port, Message::StageData { run, source, address, bytes }, step);
                }
                _ => {}
            },
            Node::Host(h) => {
                if let Message::HostGet { run, key } = msg {
                    let bytes = h.store.get(&key).ok();
                    ctx.send(from, port, Message::HostData { run, key, bytes }, step);
                }
            }
        }
    }

    pub fn tick(&mut self, idle: u32, ctx: &mut dyn Context) {
        if let Node::Entity(e) = self {
            e.tick(idle, ctx);
        }
    }

    pub fn entity(&self) -> Option<&EntityActor> {
        match self {
            Node::Entity(e) => Some(e),
            _ => None,
        }
    }

    pub fn entity_mut(&mut self) -> Option<&mut EntityActor> {
        match self {
            Node::Entity(e) => Some(e),
            _ => None,
        }
    }
}
