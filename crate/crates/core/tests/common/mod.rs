#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use agcorrect::agent::{assemble_state, AgentState, RulePolicy, ToolEnv};
use agcorrect::baseline::{context_weeks, predict, BaselineSource};
use agcorrect::ingest::{normalize, ArtifactSpec, Entity, EntityCollection, SyntheticSpec};
use agcorrect::memory::{BiasScope, MemoryStore};
use agcorrect::runner::{prepare_season, RunConfig, Season};
use agcorrect::toolkit::ToolName;
use agcorrect::Real;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Seasonal synthetic data with pre- and post-season baseline spikes.
pub fn spiked_spec() -> SyntheticSpec {
    SyntheticSpec {
        artifacts: vec![
            ArtifactSpec::PreSeasonSpike { magnitude: 0.5, count: 3 },
            ArtifactSpec::PostSeasonSpike { magnitude: 0.5, count: 3 },
        ],
        ..SyntheticSpec::default()
    }
}

pub fn spiked_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset.synthetic = Some(spiked_spec());
    cfg
}

pub fn small_config(n_test: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset.synthetic = Some(SyntheticSpec { n_train: 8, n_test, ..spiked_spec() });
    cfg
}

/// A prepared season with a memory warmed up on a few confirmed actuals,
/// for driving the agent loop directly.
pub struct Harness {
    pub collection: EntityCollection,
    pub season: Season,
    pub memory: MemoryStore,
    pub enabled: BTreeSet<ToolName>,
}

impl Harness {
    pub fn new() -> Self {
        let cfg = spiked_config();
        let collection = normalize(&agcorrect::ingest::generate_synthetic(&spiked_spec())).unwrap();
        let train: Vec<&Entity> = collection.train().collect();
        let test: Vec<&Entity> = collection.test().collect();
        let season = prepare_season(&cfg, &train, &test, collection.normalization_scale, &mut RulePolicy).unwrap();
        let mut memory = MemoryStore::new(season.jumps, BiasScope::Shared, 10);
        for e in &test {
            for o in e.observations.iter().skip(20).take(6) {
                memory.record_lagged_error(&e.entity_id, o.iso_week, 0.5, o.yield_value * 1.1 + 0.01, o.yield_value, o.week_index);
            }
        }
        let enabled = ToolName::ALL.into_iter().collect();
        Harness { collection, season, memory, enabled }
    }

    pub fn test_ids(&self) -> Vec<String> {
        self.collection.test().map(|e| e.entity_id.clone()).collect()
    }

    pub fn env(&self) -> ToolEnv<'_> {
        ToolEnv {
            kg: &self.season.kg,
            memory: &self.memory,
            range_samples: &self.season.range_samples,
            enabled: &self.enabled,
        }
    }

    /// State for `entity_id` at `week`, with every earlier raw prediction stored.
    pub fn state(&self, entity_id: &str, week: u32) -> AgentState {
        let e = self.collection.get(entity_id).unwrap();
        let artifacts: Vec<_> =
            self.collection.artifacts.iter().filter(|a| a.entity_id == entity_id).cloned().collect();
        let mut stored = BTreeMap::new();
        for w in 0..week {
            if context_weeks(w, 2).is_some() {
                stored.insert(w, predict(e, w, 2, BaselineSource::Builtin, &artifacts).unwrap().q50);
            }
        }
        let raw = predict(e, week, 2, BaselineSource::Builtin, &artifacts).unwrap();
        assemble_state(e, week, raw, &stored, &self.season.season)
    }
}

/// What the stub chat server does with each connection.
#[derive(Clone)]
pub enum StubMode {
    /// Answer with this JSON body.
    Reply(String),
    /// Read the request and never answer.
    Hang,
}

/// Minimal HTTP/1.1 server for the remote policy. Records every request body.
pub struct StubServer {
    pub url: String,
    pub bodies: Arc<Mutex<Vec<String>>>,
    pub connections: Arc<Mutex<usize>>,
    _handle: JoinHandle<()>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut head = String::new();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
        head.push_str(&line);
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).ok()?;
    Some((head, String::from_utf8(body).ok()?))
}

impl StubServer {
    pub fn start(mode: StubMode) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let connections = Arc::new(Mutex::new(0));
        let (b, c) = (bodies.clone(), connections.clone());
        let handle = std::thread::spawn(move || {
            let mut held = Vec::new();
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                *c.lock().unwrap() += 1;
                let Some((_, body)) = read_request(&mut stream) else { continue };
                b.lock().unwrap().push(body);
                match &mode {
                    StubMode::Reply(json) => {
                        let resp = format!(
                            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{json}",
                            json.len()
                        );
                        let _ = stream.write_all(resp.as_bytes());
                    }
                    StubMode::Hang => held.push(stream),
                }
            }
        });
        StubServer { url, bodies, connections, _handle: handle }
    }

    pub fn requests(&self) -> Vec<String> {
        self.bodies.lock().unwrap().clone()
    }

    /// Waits briefly for in-flight connections to register.
    pub fn settle(&self) {
        std::thread::sleep(Duration::from_millis(50));
    }
}

pub fn approx_eq(a: Real, b: Real, tol: Real) -> bool {
    (a - b).abs() <= tol
}
