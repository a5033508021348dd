//! Backend lookup by endpoint string.
//!
//! Endpoints are either `tcp://host:port` (a remote server speaking the wire
//! protocol) or `mock:<kind>?key=value&...` (an in-process mock). Each role
//! keeps a table of named factories; `tcp` and the built-in mock kinds are
//! registered by [`BackendRegistry::with_defaults`], and callers may add their
//! own.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use url::Url;

use crate::backend::{BackendError, ChunkClassifier, PolicyBackend, WorldModelBackend};
use crate::mock::{
    OracleClassifier, ParamMap, ProportionalPolicy, ProportionalSettings, SandboxParams,
    SandboxWorldModel, ScriptedPolicy, ZeroPolicy,
};
use crate::protocol::{Hello, ProtocolLimits, RemoteSession, Role, ServedBackend};
use crate::rollout::SessionSource;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp { addr: String },
    Mock { kind: String, params: ParamMap },
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Self, String> {
        let url = Url::parse(s).map_err(|e| format!("invalid endpoint `{s}`: {e}"))?;
        match url.scheme() {
            "tcp" => {
                let host = url
                    .host_str()
                    .ok_or_else(|| format!("endpoint `{s}` has no host"))?;
                let port = url
                    .port()
                    .ok_or_else(|| format!("endpoint `{s}` has no port"))?;
                Ok(Endpoint::Tcp {
                    addr: format!("{host}:{port}"),
                })
            }
            "mock" => {
                let kind = url.path().trim_matches('/').to_owned();
                if kind.is_empty() {
                    return Err(format!("endpoint `{s}` names no mock kind"));
                }
                let params = ParamMap(url.query_pairs().into_owned().collect());
                Ok(Endpoint::Mock { kind, params })
            }
            other => Err(format!(
                "endpoint `{s}` has unsupported scheme `{other}` (use tcp:// or mock:)"
            )),
        }
    }

    /// Registry key: `tcp` or `mock:<kind>`.
    pub fn factory_name(&self) -> String {
        match self {
            Endpoint::Tcp { .. } => "tcp".into(),
            Endpoint::Mock { kind, .. } => format!("mock:{kind}"),
        }
    }

    pub fn params(&self) -> ParamMap {
        match self {
            Endpoint::Tcp { .. } => ParamMap::default(),
            Endpoint::Mock { params, .. } => params.clone(),
        }
    }
}

pub type PolicyMaker =
    Arc<dyn Fn(&Endpoint, &Hello) -> Result<Box<dyn PolicyBackend>, BackendError> + Send + Sync>;
pub type WorldModelMaker = Arc<
    dyn Fn(&Endpoint, &Hello) -> Result<Box<dyn WorldModelBackend>, BackendError> + Send + Sync,
>;
pub type ClassifierMaker =
    Arc<dyn Fn(&Endpoint, &Hello) -> Result<Box<dyn ChunkClassifier>, BackendError> + Send + Sync>;

#[derive(Clone)]
pub struct BackendRegistry {
    limits: ProtocolLimits,
    policies: BTreeMap<String, PolicyMaker>,
    world_models: BTreeMap<String, WorldModelMaker>,
    classifiers: BTreeMap<String, ClassifierMaker>,
}

fn config(e: String) -> BackendError {
    BackendError::Config(e)
}

fn connect(
    endpoint: &Endpoint,
    hello: &Hello,
    limits: ProtocolLimits,
) -> Result<RemoteSession, BackendError> {
    match endpoint {
        Endpoint::Tcp { addr } => RemoteSession::connect(addr.as_str(), hello, limits),
        Endpoint::Mock { .. } => Err(config("tcp factory given a mock endpoint".into())),
    }
}

impl BackendRegistry {
    pub fn empty(limits: ProtocolLimits) -> Self {
        Self {
            limits,
            policies: BTreeMap::new(),
            world_models: BTreeMap::new(),
            classifiers: BTreeMap::new(),
        }
    }

    pub fn with_defaults(limits: ProtocolLimits) -> Self {
        let mut r = Self::empty(limits);
        r.register_policy(
            "tcp",
            Arc::new(move |e, h| Ok(Box::new(connect(e, h, limits)?))),
        );
        r.register_world_model(
            "tcp",
            Arc::new(move |e, h| Ok(Box::new(connect(e, h, limits)?))),
        );
        r.register_classifier(
            "tcp",
            Arc::new(move |e, h| Ok(Box::new(connect(e, h, limits)?))),
        );

        r.register_policy(
            "mock:zero",
            Arc::new(|e, _| {
                let p = e.params();
                let d = ZeroPolicy::default();
                Ok(Box::new(ZeroPolicy {
                    rate_hz: p.u32_or("rate", d.rate_hz).map_err(config)?,
                    chunk_len: p.usize_or("chunk_len", d.chunk_len).map_err(config)?,
                }))
            }),
        );
        r.register_policy(
            "mock:scripted",
            Arc::new(|e, _| {
                let p = e.params();
                let path = p
                    .get("script")
                    .ok_or_else(|| config("mock:scripted needs a `script` path".into()))?;
                Ok(Box::new(ScriptedPolicy::from_file(Path::new(path))?))
            }),
        );
        r.register_policy(
            "mock:proportional",
            Arc::new(|e, _| {
                let s = ProportionalSettings::from_params(&e.params()).map_err(config)?;
                Ok(Box::new(ProportionalPolicy::new(s)))
            }),
        );
        r.register_world_model(
            "mock:sandbox",
            Arc::new(|e, _| {
                let p = SandboxParams::from_params(&e.params()).map_err(config)?;
                Ok(Box::new(SandboxWorldModel::new(p)?))
            }),
        );
        r.register_classifier(
            "mock:oracle",
            Arc::new(|_, h| Ok(Box::new(OracleClassifier::new(h.task_names.clone())))),
        );
        r
    }

    pub fn limits(&self) -> ProtocolLimits {
        self.limits
    }

    pub fn register_policy(&mut self, name: &str, maker: PolicyMaker) {
        self.policies.insert(name.to_owned(), maker);
    }

    pub fn register_world_model(&mut self, name: &str, maker: WorldModelMaker) {
        self.world_models.insert(name.to_owned(), maker);
    }

    pub fn register_classifier(&mut self, name: &str, maker: ClassifierMaker) {
        self.classifiers.insert(name.to_owned(), maker);
    }

    pub fn names(&self, role: Role) -> Vec<String> {
        match role {
            Role::Policy => self.policies.keys().cloned().collect(),
            Role::WorldModel => self.world_models.keys().cloned().collect(),
            Role::Classifier => self.classifiers.keys().cloned().collect(),
        }
    }

    fn lookup<'a, T>(
        table: &'a BTreeMap<String, T>,
        endpoint: &Endpoint,
        role: Role,
    ) -> Result<&'a T, BackendError> {
        let name = endpoint.factory_name();
        table
            .get(&name)
            .ok_or_else(|| config(format!("no {role} backend registered as `{name}`")))
    }

    pub fn open_policy(
        &self,
        endpoint: &str,
        hello: &Hello,
    ) -> Result<Box<dyn PolicyBackend>, BackendError> {
        let e = Endpoint::parse(endpoint).map_err(config)?;
        Self::lookup(&self.policies, &e, Role::Policy)?(&e, hello)
    }

    pub fn open_world_model(
        &self,
        endpoint: &str,
        hello: &Hello,
    ) -> Result<Box<dyn WorldModelBackend>, BackendError> {
        let e = Endpoint::parse(endpoint).map_err(config)?;
        Self::lookup(&self.world_models, &e, Role::WorldModel)?(&e, hello)
    }

    pub fn open_classifier(
        &self,
        endpoint: &str,
        hello: &Hello,
    ) -> Result<Box<dyn ChunkClassifier>, BackendError> {
        let e = Endpoint::parse(endpoint).map_err(config)?;
        Self::lookup(&self.classifiers, &e, Role::Classifier)?(&e, hello)
    }

    /// Wraps a registered backend so a protocol server can instantiate one
    /// per session.
    pub fn served(&self, role: Role, endpoint: &str) -> Result<ServedBackend, BackendError> {
        self.served_endpoint(role, Endpoint::parse(endpoint).map_err(config)?)
    }

    pub fn served_endpoint(&self, role: Role, e: Endpoint) -> Result<ServedBackend, BackendError> {
        Ok(match role {
            Role::Policy => {
                let make = Self::lookup(&self.policies, &e, role)?.clone();
                ServedBackend::Policy(Arc::new(move |h| make(&e, h)))
            }
            Role::WorldModel => {
                let make = Self::lookup(&self.world_models, &e, role)?.clone();
                ServedBackend::WorldModel(Arc::new(move |h| make(&e, h)))
            }
            Role::Classifier => {
                let make = Self::lookup(&self.classifiers, &e, role)?.clone();
                ServedBackend::Classifier(Arc::new(move |h| make(&e, h)))
            }
        })
    }
}

/// [`SessionSource`] that opens sessions through a registry.
pub struct RegistrySessions<'a> {
    pub registry: &'a BackendRegistry,
    /// policy id → endpoint
    pub policies: BTreeMap<String, String>,
    pub world_model: String,
    pub tasks: Vec<String>,
    pub frame_size: (u32, u32),
}

impl RegistrySessions<'_> {
    fn hello(&self, role: Role) -> Hello {
        Hello::new(
            role,
            self.tasks.clone(),
            self.frame_size.0,
            self.frame_size.1,
        )
    }
}

impl SessionSource for RegistrySessions<'_> {
    fn open_policy(&self, policy_id: &str) -> Result<Box<dyn PolicyBackend>, BackendError> {
        let endpoint = self
            .policies
            .get(policy_id)
            .ok_or_else(|| config(format!("unknown policy id `{policy_id}`")))?;
        self.registry
            .open_policy(endpoint, &self.hello(Role::Policy))
    }

    fn open_world_model(&self) -> Result<Box<dyn WorldModelBackend>, BackendError> {
        self.registry
            .open_world_model(&self.world_model, &self.hello(Role::WorldModel))
    }
}
