//! Session store: in-memory with TTL eviction, optionally mirrored to disk.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use matteforge::imaging::{BoundingBox, Image};
use matteforge::io::{encode_gray_png, encode_mask_png, encode_rgb_png, load_image, write_bytes};
use matteforge::multires::{CandidateRecord, CandidateSet};
use matteforge::pipeline::{PipelineConfig, PipelineResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub max_upload_bytes: usize,
    pub compute_timeout: Duration,
    pub session_ttl: Duration,
    /// Mirror sessions here and reload them on start.
    pub persist_dir: Option<PathBuf>,
    /// Allowed CORS origin; `None` allows any.
    pub cors_origin: Option<String>,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload_bytes: 20 * 1024 * 1024,
            compute_timeout: Duration::from_secs(120),
            session_ttl: Duration::from_secs(3600),
            persist_dir: None,
            cors_origin: None,
            pipeline: PipelineConfig::default(),
        }
    }
}

/// One immutable result: encoded rasters plus the candidate table it came from.
#[derive(Debug, Clone)]
pub struct Revision {
    pub number: u32,
    pub bbox: BoundingBox,
    pub selected_factor: usize,
    pub records: Vec<CandidateRecord>,
    pub rasters: BTreeMap<String, Arc<Vec<u8>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RevisionMeta {
    number: u32,
    bbox: BoundingBox,
    selected_factor: usize,
    records: Vec<CandidateRecord>,
    kinds: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionMeta {
    id: String,
    created_unix: u64,
    revisions: Vec<RevisionMeta>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub image: Arc<Image>,
    pub created_at: SystemTime,
    /// Candidates of the latest segment call, kept for overrides. Missing
    /// after a reload from disk until regenerated.
    pub candidates: Option<Arc<CandidateSet>>,
    pub revisions: Vec<Revision>,
}

impl Session {
    pub fn new(id: String, image: Image) -> Self {
        Self {
            id,
            image: Arc::new(image),
            created_at: SystemTime::now(),
            candidates: None,
            revisions: Vec::new(),
        }
    }

    pub fn latest(&self) -> Option<&Revision> {
        self.revisions.last()
    }

    pub fn revision(&self, number: u32) -> Option<&Revision> {
        self.revisions.iter().find(|r| r.number == number)
    }

    pub fn next_revision(&self) -> u32 {
        self.revisions.last().map_or(1, |r| r.number + 1)
    }
}

pub struct SessionSlot {
    last_access: Mutex<Instant>,
    pub session: tokio::sync::Mutex<Session>,
}

impl SessionSlot {
    fn touch(&self) {
        *self.last_access.lock().expect("access clock") = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_access.lock().expect("access clock"))
    }
}

#[derive(Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    sessions: Arc<Mutex<HashMap<String, Arc<SessionSlot>>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config: Arc::new(config),
            sessions: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn insert(&self, session: Session) -> Arc<SessionSlot> {
        let slot = Arc::new(SessionSlot {
            last_access: Mutex::new(Instant::now()),
            session: tokio::sync::Mutex::new(session),
        });
        let id = slot.session.try_lock().expect("fresh session is unlocked").id.clone();
        self.sessions.lock().expect("session map").insert(id, slot.clone());
        slot
    }

    /// Looks a session up and refreshes its idle clock; expired sessions are
    /// dropped on sight.
    pub fn get(&self, id: &str) -> Option<Arc<SessionSlot>> {
        let mut map = self.sessions.lock().expect("session map");
        let slot = map.get(id)?.clone();
        if slot.idle_for(Instant::now()) > self.config.session_ttl {
            map.remove(id);
            drop(map);
            self.forget_on_disk(id);
            return None;
        }
        slot.touch();
        Some(slot)
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle longer than the TTL as of `now`; returns how many.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let expired: Vec<String> = {
            let mut map = self.sessions.lock().expect("session map");
            let ids: Vec<String> = map
                .iter()
                .filter(|(_, s)| s.idle_for(now) > self.config.session_ttl)
                .map(|(id, _)| id.clone())
                .collect();
            for id in &ids {
                map.remove(id);
            }
            ids
        };
        for id in &expired {
            self.forget_on_disk(id);
        }
        expired.len()
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.config.persist_dir.as_ref().map(|d| d.join(id))
    }

    fn forget_on_disk(&self, id: &str) {
        if let Some(dir) = self.session_dir(id) {
            let _ = fs::remove_dir_all(dir);
        }
    }

    /// Writes the image and every revision of `session` under the persist
    /// directory, if one is configured.
    pub fn persist(&self, session: &Session) -> matteforge::Result<()> {
        let Some(dir) = self.session_dir(&session.id) else {
            return Ok(());
        };
        let image_path = dir.join("image.png");
        if !image_path.exists() {
            write_bytes(&image_path, &encode_rgb_png(&session.image)?)?;
        }
        let mut revisions = Vec::new();
        for rev in &session.revisions {
            let rev_dir = dir.join(format!("rev-{}", rev.number));
            for (kind, bytes) in &rev.rasters {
                let path = rev_dir.join(format!("{kind}.png"));
                if !path.exists() {
                    write_bytes(&path, bytes)?;
                }
            }
            revisions.push(RevisionMeta {
                number: rev.number,
                bbox: rev.bbox,
                selected_factor: rev.selected_factor,
                records: rev.records.clone(),
                kinds: rev.rasters.keys().cloned().collect(),
            });
        }
        let meta = SessionMeta {
            id: session.id.clone(),
            created_unix: session.created_at.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            revisions,
        };
        let json = serde_json::to_vec_pretty(&meta).expect("session metadata serialises");
        write_bytes(dir.join("session.json"), &json)
    }

    /// Reloads every session found under the persist directory. Unreadable
    /// session directories are skipped; returns the number restored.
    pub fn restore(&self) -> usize {
        let Some(root) = self.config.persist_dir.clone() else {
            return 0;
        };
        let Ok(entries) = fs::read_dir(&root) else {
            return 0;
        };
        let mut restored = 0;
        for entry in entries.flatten() {
            if let Some(session) = load_session(&entry.path()) {
                self.insert(session);
                restored += 1;
            }
        }
        restored
    }
}

fn load_session(dir: &Path) -> Option<Session> {
    let meta: SessionMeta = serde_json::from_slice(&fs::read(dir.join("session.json")).ok()?).ok()?;
    let image = load_image(dir.join("image.png")).ok()?;
    let mut revisions = Vec::new();
    for m in meta.revisions {
        let rev_dir = dir.join(format!("rev-{}", m.number));
        let mut rasters = BTreeMap::new();
        for kind in m.kinds {
            let bytes = fs::read(rev_dir.join(format!("{kind}.png"))).ok()?;
            rasters.insert(kind, Arc::new(bytes));
        }
        revisions.push(Revision {
            number: m.number,
            bbox: m.bbox,
            selected_factor: m.selected_factor,
            records: m.records,
            rasters,
        });
    }
    Some(Session {
        id: meta.id,
        image: Arc::new(image),
        created_at: UNIX_EPOCH + Duration::from_secs(meta.created_unix),
        candidates: None,
        revisions,
    })
}

/// PNGs of every viable candidate's low-resolution mask, keyed `candidate-K`.
pub fn candidate_rasters(cs: &CandidateSet) -> matteforge::Result<BTreeMap<String, Arc<Vec<u8>>>> {
    let mut out = BTreeMap::new();
    for c in &cs.candidates {
        if let Some(l) = &c.labeling {
            out.insert(format!("candidate-{}", c.factor), Arc::new(encode_mask_png(l.mask())?));
        }
    }
    Ok(out)
}

/// Encodes a pipeline result as a revision. Candidate rasters are passed in
/// so overrides can share them with earlier revisions.
pub fn build_revision(
    number: u32,
    bbox: BoundingBox,
    result: &PipelineResult,
    candidate_pngs: &BTreeMap<String, Arc<Vec<u8>>>,
) -> matteforge::Result<Revision> {
    let mut rasters = candidate_pngs.clone();
    let (w, h) = (result.final_mask.width(), result.final_mask.height());
    rasters.insert("mask".into(), Arc::new(encode_mask_png(&result.final_mask)?));
    rasters.insert("pre-refine".into(), Arc::new(encode_mask_png(&result.pre_refine_mask)?));
    rasters.insert("matte".into(), Arc::new(encode_gray_png(w, h, result.matte.to_gray())?));
    rasters.insert("trimap".into(), Arc::new(encode_gray_png(w, h, result.trimap.to_gray())?));
    Ok(Revision {
        number,
        bbox,
        selected_factor: result.selected_factor(),
        records: result.candidates.records(),
        rasters,
    })
}
