//! End-to-end memory networks for retrieval dialog: the dialog model (with
//! an optional second prediction head for multi-task training) and the
//! weight-generation variant that emits a scalar in (0,1).

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{MetaExample, TaskModel, WeightModel};
use crate::ops::{argmax, sigmoid, softmax, softmax_cross_entropy};
use crate::rng::Rng;
use crate::tensor::{DenseMatrix, ParamVector};

pub const EMBED_DIM: usize = 20;
pub const HOPS: usize = 3;

/// Answer id for test-split targets absent from the candidate set;
/// always scored as a wrong prediction.
pub const MISSING_ANSWER: usize = usize::MAX;

/// Sparse bag-of-words encoding: (token id, count) pairs.
pub type SparseVec = Vec<(u32, f64)>;

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";

/// Token table built from the training split only. Unknown tokens map to
/// the reserved UNK id.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from sentences, with UNK and PAD reserved at ids 0 and 1.
    pub fn build<'a>(sentences: impl Iterator<Item = &'a [String]>) -> Vocabulary {
        let mut tokens: Vec<String> = vec![UNK.to_string(), PAD.to_string()];
        let mut index: HashMap<String, u32> = HashMap::new();
        index.insert(UNK.to_string(), 0);
        index.insert(PAD.to_string(), 1);
        for sent in sentences {
            for tok in sent {
                if !index.contains_key(tok) {
                    index.insert(tok.clone(), tokens.len() as u32);
                    tokens.push(tok.clone());
                }
            }
        }
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

/// Bag-of-words counts over the vocabulary; out-of-vocabulary tokens
/// count toward UNK.
pub fn encode_bow(sentence: &[String], vocab: &Vocabulary) -> SparseVec {
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for tok in sentence {
        *counts.entry(vocab.lookup(tok)).or_insert(0.0) += 1.0;
    }
    let mut enc: SparseVec = counts.into_iter().collect();
    enc.sort_unstable_by_key(|&(id, _)| id);
    enc
}

/// The fixed list of system responses a retrieval model ranks.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub utterances: Vec<String>,
    pub encodings: Vec<SparseVec>,
}

impl CandidateSet {
    /// Deduplicated candidate list in first-seen order.
    pub fn build(utterances: &[String], vocab: &Vocabulary) -> CandidateSet {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut list: Vec<String> = Vec::new();
        for u in utterances {
            if !seen.contains_key(u.as_str()) {
                seen.insert(u.as_str(), list.len());
                list.push(u.clone());
            }
        }
        let encodings = list
            .iter()
            .map(|u| encode_bow(&tokenize(u), vocab))
            .collect();
        CandidateSet {
            utterances: list,
            encodings,
        }
    }

    pub fn id_of(&self, utterance: &str) -> Option<usize> {
        self.utterances.iter().position(|u| u == utterance)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// Lowercase whitespace tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskTag {
    Primary,
    Related,
}

/// One encoded retrieval example: dialog history in memory, the last user
/// utterance as the query, and the target candidate id.
#[derive(Debug, Clone)]
pub struct DialogExample {
    pub memory: Vec<SparseVec>,
    pub query: SparseVec,
    pub answer: usize,
    /// Encoding of the ground-truth answer text, consumed by the weight
    /// network as its final memory entry.
    pub answer_enc: SparseVec,
    pub task_tag: TaskTag,
}

impl MetaExample for DialogExample {
    fn indicator(&self) -> Option<bool> {
        None
    }
}

fn embed_into(a: &DenseMatrix, enc: &SparseVec, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = 0.0;
    }
    for &(tok, count) in enc {
        for (o, &w) in out.iter_mut().zip(a.row(tok as usize)) {
            *o += count * w;
        }
    }
}

struct BodyTrace {
    mem_emb: Vec<Vec<f64>>,
    /// u_0 .. u_hops.
    states: Vec<Vec<f64>>,
    /// attention probabilities per hop (empty vec when memory is empty).
    attns: Vec<Vec<f64>>,
}

/// Shared attention body: u0 = A q; per hop, attend over A-embedded
/// memories, read out, and transform with R. Empty memory reads out zero.
fn body_forward(
    a: &DenseMatrix,
    r: &DenseMatrix,
    memory: &[SparseVec],
    query: &SparseVec,
    hops: usize,
    dim: usize,
) -> Result<BodyTrace> {
    let mut mem_emb = Vec::with_capacity(memory.len());
    for m in memory {
        let mut e = vec![0.0; dim];
        embed_into(a, m, &mut e);
        mem_emb.push(e);
    }
    let mut u = vec![0.0; dim];
    embed_into(a, query, &mut u);
    let mut states = vec![u];
    let mut attns = Vec::with_capacity(hops);
    for _ in 0..hops {
        let u = states.last().expect("at least u0");
        let mut next = r.matvec(u)?;
        if mem_emb.is_empty() {
            attns.push(Vec::new());
        } else {
            let logits: Vec<f64> = mem_emb
                .iter()
                .map(|e| e.iter().zip(u).map(|(a, b)| a * b).sum())
                .collect();
            let p = softmax(&logits);
            for (pi, e) in p.iter().zip(&mem_emb) {
                for (n, &ei) in next.iter_mut().zip(e) {
                    *n += pi * ei;
                }
            }
            attns.push(p);
        }
        states.push(next);
    }
    Ok(BodyTrace {
        mem_emb,
        states,
        attns,
    })
}

/// Backward through the attention body given dL/du_final; accumulates into
/// the A and R gradient matrices.
fn body_backward(
    grad_a: &mut DenseMatrix,
    grad_r: &mut DenseMatrix,
    r: &DenseMatrix,
    memory: &[SparseVec],
    query: &SparseVec,
    trace: &BodyTrace,
    du_final: &[f64],
    hops: usize,
    dim: usize,
) -> Result<()> {
    let mut de: Vec<Vec<f64>> = trace.mem_emb.iter().map(|_| vec![0.0; dim]).collect();
    let mut g = du_final.to_vec();
    for hop in (0..hops).rev() {
        let u = &trace.states[hop];
        // u_{hop+1} = R u_hop + o_hop
        for (a, &gi) in (0..dim).zip(g.iter()) {
            for (b, &ub) in u.iter().enumerate() {
                let v = grad_r.get(a, b) + gi * ub;
                grad_r.set(a, b, v);
            }
        }
        let mut du = r.matvec_t(&g)?;
        let p = &trace.attns[hop];
        if !p.is_empty() {
            let dp: Vec<f64> = trace
                .mem_emb
                .iter()
                .map(|e| e.iter().zip(&g).map(|(a, b)| a * b).sum())
                .collect();
            let dot: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
            let da: Vec<f64> = p.iter().zip(&dp).map(|(pi, dpi)| pi * (dpi - dot)).collect();
            for ((dei, e), (&pi, &dai)) in de
                .iter_mut()
                .zip(&trace.mem_emb)
                .zip(p.iter().zip(&da))
            {
                for ((d, &gi), &ui) in dei.iter_mut().zip(&g).zip(u) {
                    *d += pi * gi + dai * ui;
                }
                for (duk, &ei) in du.iter_mut().zip(e) {
                    *duk += dai * ei;
                }
                let _ = e;
            }
        }
        g = du;
    }
    // dA from the query (u0) and from every memory sentence.
    for &(tok, count) in query {
        for (ga, &gi) in grad_a.row_mut(tok as usize).iter_mut().zip(&g) {
            *ga += count * gi;
        }
    }
    for (m, dei) in memory.iter().zip(&de) {
        for &(tok, count) in m {
            for (ga, &di) in grad_a.row_mut(tok as usize).iter_mut().zip(dei) {
                *ga += count * di;
            }
        }
    }
    Ok(())
}

/// Retrieval memory network. Segments: A (context/query embedding),
/// R (state transform), C (primary candidate embedding) and, for the
/// two-head multi-task variant, C_rel (related candidate embedding).
#[derive(Debug, Clone)]
pub struct MemoryNetwork {
    params: ParamVector,
    hops: usize,
    dim: usize,
    cands: Arc<CandidateSet>,
    cands_related: Option<Arc<CandidateSet>>,
}

fn init_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for x in m.data_mut() {
        *x = rng.uniform_range(-scale, scale);
    }
    m
}

impl MemoryNetwork {
    pub fn new(
        vocab_size: usize,
        dim: usize,
        hops: usize,
        cands: Arc<CandidateSet>,
        cands_related: Option<Arc<CandidateSet>>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if cands.is_empty() || cands_related.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(Error::Config("candidate set is empty".into()));
        }
        let mut segments = vec![
            ("A", init_matrix(vocab_size, dim, 0.1, rng)),
            ("R", init_matrix(dim, dim, 0.1, rng)),
            ("C", init_matrix(vocab_size, dim, 0.1, rng)),
        ];
        if cands_related.is_some() {
            segments.push(("C_rel", init_matrix(vocab_size, dim, 0.1, rng)));
        }
        Ok(MemoryNetwork {
            params: ParamVector::new(segments)?,
            hops,
            dim,
            cands,
            cands_related,
        })
    }

    /// Embedding size 20, 3 hops.
    pub fn standard(
        vocab_size: usize,
        cands: Arc<CandidateSet>,
        cands_related: Option<Arc<CandidateSet>>,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::new(vocab_size, EMBED_DIM, HOPS, cands, cands_related, rng)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn candidates(&self) -> &Arc<CandidateSet> {
        &self.cands
    }

    fn head_for(&self, tag: TaskTag) -> (&'static str, &CandidateSet) {
        match tag {
            TaskTag::Primary => ("C", self.cands.as_ref()),
            TaskTag::Related => match &self.cands_related {
                Some(c) => ("C_rel", c.as_ref()),
                None => ("C", self.cands.as_ref()),
            },
        }
    }

    fn scores_from_state(&self, head: &str, cands: &CandidateSet, state: &[f64]) -> Vec<f64> {
        let c = self.params.segment(head);
        cands
            .encodings
            .iter()
            .map(|enc| {
                let mut s = 0.0;
                for &(tok, count) in enc {
                    let row = c.row(tok as usize);
                    s += count * row.iter().zip(state).map(|(a, b)| a * b).sum::<f64>();
                }
                s
            })
            .collect()
    }

    /// Final attention state, candidate scores, and cross-entropy loss for
    /// one example, scored by the head matching its task tag.
    pub fn memnet_forward(&self, ex: &DialogExample) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let (head, cands) = self.head_for(ex.task_tag);
        if cands.is_empty() {
            return Err(Error::Config("candidate set is empty".into()));
        }
        let trace = body_forward(
            self.params.segment("A"),
            self.params.segment("R"),
            &ex.memory,
            &ex.query,
            self.hops,
            self.dim,
        )?;
        let state = trace.states.last().expect("final state").clone();
        let scores = self.scores_from_state(head, cands, &state);
        let loss = if ex.answer == MISSING_ANSWER {
            // Target absent from the candidate list (test split only):
            // fixed chance-level loss, no gradient, always predicted wrong.
            (cands.len() as f64).ln()
        } else {
            softmax_cross_entropy(&scores, ex.answer)?.0
        };
        Ok((state, scores, loss))
    }

    /// Gradient of sum_i scale_i * loss_i over a batch; linear in scale.
    pub fn memnet_backward(
        &self,
        batch: &[&DialogExample],
        scale: &[f64],
    ) -> Result<ParamVector> {
        if scale.len() != batch.len() {
            return Err(Error::Length {
                expected: batch.len(),
                got: scale.len(),
                context: "memnet_backward scale".into(),
            });
        }
        let mut grad = self.params.zeros_like();
        for (ex, &s) in batch.iter().zip(scale) {
            if s == 0.0 || ex.answer == MISSING_ANSWER {
                continue;
            }
            self.backward_single(ex, s, &mut grad)?;
        }
        Ok(grad)
    }

    fn backward_single(&self, ex: &DialogExample, scale: f64, grad: &mut ParamVector) -> Result<()> {
        let (head, cands) = self.head_for(ex.task_tag);
        let a = self.params.segment("A");
        let r = self.params.segment("R");
        let trace = body_forward(a, r, &ex.memory, &ex.query, self.hops, self.dim)?;
        let state = trace.states.last().expect("final state").clone();
        let scores = self.scores_from_state(head, cands, &state);
        let (_, mut dscores) = softmax_cross_entropy(&scores, ex.answer)?;
        for d in dscores.iter_mut() {
            *d *= scale;
        }
        // Candidate head: dC[tok,:] += count * ds_j * state; du = sum_j ds_j c_j.
        let mut du = vec![0.0; self.dim];
        {
            let c = self.params.segment(head).clone();
            let gc = grad.segment_mut(head);
            for (enc, &ds) in cands.encodings.iter().zip(&dscores) {
                if ds == 0.0 {
                    continue;
                }
                for &(tok, count) in enc {
                    for (g, &st) in gc.row_mut(tok as usize).iter_mut().zip(&state) {
                        *g += count * ds * st;
                    }
                    for (d, &cw) in du.iter_mut().zip(c.row(tok as usize)) {
                        *d += count * ds * cw;
                    }
                }
            }
        }
        // Body: split the borrow by taking A/R grads out and putting them back.
        let mut grad_a = std::mem::replace(grad.segment_mut("A"), DenseMatrix::zeros(0, 0));
        let mut grad_r = std::mem::replace(grad.segment_mut("R"), DenseMatrix::zeros(0, 0));
        body_backward(
            &mut grad_a,
            &mut grad_r,
            r,
            &ex.memory,
            &ex.query,
            &trace,
            &du,
            self.hops,
            self.dim,
        )?;
        *grad.segment_mut("A") = grad_a;
        *grad.segment_mut("R") = grad_r;
        Ok(())
    }

    pub fn predict(&self, ex: &DialogExample) -> usize {
        let (_, scores, _) = self.memnet_forward(ex).expect("forward");
        argmax(&scores)
    }
}

impl TaskModel for MemoryNetwork {
    type Ex = DialogExample;

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    fn batch_losses(&self, batch: &[&DialogExample]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch("memnet batch_losses".into()));
        }
        batch
            .iter()
            .map(|ex| Ok(self.memnet_forward(ex)?.2))
            .collect()
    }

    fn grad_weighted(&self, batch: &[&DialogExample], scale: &[f64]) -> Result<ParamVector> {
        self.memnet_backward(batch, scale)
    }

    fn correct(&self, ex: &DialogExample) -> bool {
        ex.answer != MISSING_ANSWER && self.predict(ex) == ex.answer
    }
}

/// Memory network that generates a scalar weight: the final attention
/// state feeds a linear unit and a sigmoid. The example's ground-truth
/// answer is appended as the last memory entry so the weight conditions
/// on (context, answer).
#[derive(Debug, Clone)]
pub struct WeightMemNet {
    params: ParamVector,
    hops: usize,
    dim: usize,
}

impl WeightMemNet {
    pub fn new(vocab_size: usize, dim: usize, hops: usize, rng: &mut Rng) -> Result<Self> {
        let params = ParamVector::new(vec![
            ("A", init_matrix(vocab_size, dim, 0.1, rng)),
            ("R", init_matrix(dim, dim, 0.1, rng)),
            ("Wout", init_matrix(dim, 1, 0.1, rng)),
            ("bout", DenseMatrix::zeros(1, 1)),
        ])?;
        Ok(WeightMemNet { params, hops, dim })
    }

    pub fn standard(vocab_size: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(vocab_size, EMBED_DIM, HOPS, rng)
    }

    fn memory_with_answer(ex: &DialogExample) -> Vec<SparseVec> {
        let mut mem = ex.memory.clone();
        mem.push(ex.answer_enc.clone());
        mem
    }

    pub fn weight_forward(&self, ex: &DialogExample) -> Result<f64> {
        let mem = Self::memory_with_answer(ex);
        let trace = body_forward(
            self.params.segment("A"),
            self.params.segment("R"),
            &mem,
            &ex.query,
            self.hops,
            self.dim,
        )?;
        let state = trace.states.last().expect("final state");
        let wout = self.params.segment("Wout");
        let z = self.params.segment("bout").data()[0]
            + state
                .iter()
                .enumerate()
                .map(|(i, &s)| s * wout.get(i, 0))
                .sum::<f64>();
        Ok(sigmoid(z))
    }
}

impl WeightModel for WeightMemNet {
    type Ex = DialogExample;

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    fn weights(&self, batch: &[&DialogExample]) -> Result<Vec<f64>> {
        batch.iter().map(|ex| self.weight_forward(ex)).collect()
    }

    fn grad_weights(&self, batch: &[&DialogExample], upstream: &[f64]) -> Result<ParamVector> {
        if upstream.len() != batch.len() {
            return Err(Error::Length {
                expected: batch.len(),
                got: upstream.len(),
                context: "weight memnet upstream".into(),
            });
        }
        let mut grad = self.params.zeros_like();
        let r = self.params.segment("R").clone();
        let wout = self.params.segment("Wout").clone();
        for (ex, &u) in batch.iter().zip(upstream) {
            if u == 0.0 {
                continue;
            }
            let mem = Self::memory_with_answer(ex);
            let trace = body_forward(
                self.params.segment("A"),
                &r,
                &mem,
                &ex.query,
                self.hops,
                self.dim,
            )?;
            let state = trace.states.last().expect("final state").clone();
            let z = self.params.segment("bout").data()[0]
                + state
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| s * wout.get(i, 0))
                    .sum::<f64>();
            let w = sigmoid(z);
            let dz = u * w * (1.0 - w);
            for (i, &st) in state.iter().enumerate() {
                let v = grad.segment_mut("Wout").get(i, 0) + dz * st;
                grad.segment_mut("Wout").set(i, 0, v);
            }
            grad.segment_mut("bout").data_mut()[0] += dz;
            let du: Vec<f64> = (0..self.dim).map(|i| dz * wout.get(i, 0)).collect();
            let mut grad_a = std::mem::replace(grad.segment_mut("A"), DenseMatrix::zeros(0, 0));
            let mut grad_r = std::mem::replace(grad.segment_mut("R"), DenseMatrix::zeros(0, 0));
            body_backward(
                &mut grad_a,
                &mut grad_r,
                &r,
                &mem,
                &ex.query,
                &trace,
                &du,
                self.hops,
                self.dim,
            )?;
            *grad.segment_mut("A") = grad_a;
            *grad.segment_mut("R") = grad_r;
        }
        Ok(grad)
    }
}
