//! Flattening of expression DAGs into an evaluation tape.
//!
//! Every distinct subexpression gets exactly one register; structurally
//! identical nodes (same op, same operand registers) are merged. The tape is
//! in topological order, so evaluation is a single forward sweep.

use std::collections::HashMap;

use super::{BinaryOp, Bindings, Expr, ExprKind, MatExpr, SymError, UnaryOp, VecExpr};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instr {
    Const(f64),
    Input(u32),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Input(u32),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
}

/// One named output block and where its entries live in the output vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSlot {
    pub name: String,
    pub shape: (usize, usize),
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct Output {
    name: String,
    shape: (usize, usize),
    entries: Vec<Expr>,
}

impl Output {
    pub fn scalar(name: &str, e: &Expr) -> Self {
        Self {
            name: name.to_string(),
            shape: (1, 1),
            entries: vec![e.clone()],
        }
    }

    pub fn vector(name: &str, v: &VecExpr) -> Self {
        Self {
            name: name.to_string(),
            shape: (v.len(), 1),
            entries: v.entries().to_vec(),
        }
    }

    pub fn matrix(name: &str, m: &MatExpr) -> Self {
        Self {
            name: name.to_string(),
            shape: m.shape(),
            entries: m.entries().to_vec(),
        }
    }
}

/// Immutable compiled form of a set of expressions.
///
/// Evaluation takes a caller-owned scratch buffer, so one plan can be shared
/// between threads.
#[derive(Debug, Clone)]
pub struct CompiledPlan {
    tape: Vec<Instr>,
    input_layout: Vec<(String, usize)>,
    output_layout: Vec<OutputSlot>,
    output_regs: Vec<u32>,
    input_len: usize,
}

struct Compiler {
    tape: Vec<Instr>,
    dedup: HashMap<Key, u32>,
    by_node: HashMap<u64, u32>,
    input_offsets: HashMap<String, (usize, usize)>,
}

impl Compiler {
    fn lower(&mut self, root: &Expr) -> Result<u32, SymError> {
        // iterative post-order so deep graphs do not hit the stack limit
        let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if self.by_node.contains_key(&e.id()) {
                continue;
            }
            if !expanded {
                stack.push((e.clone(), true));
                match e.kind() {
                    ExprKind::Unary(_, c) => stack.push((c.clone(), false)),
                    ExprKind::Binary(_, a, b) => {
                        stack.push((b.clone(), false));
                        stack.push((a.clone(), false));
                    }
                    _ => {}
                }
                continue;
            }
            let (key, instr) = match e.kind() {
                ExprKind::Constant(c) => (Key::Const(c.to_bits()), Instr::Const(*c)),
                ExprKind::Input { group, index } => {
                    let &(offset, len) = self
                        .input_offsets
                        .get(&**group)
                        .ok_or_else(|| SymError::MissingGroup(group.to_string()))?;
                    if *index >= len {
                        return Err(SymError::InputIndex {
                            group: group.to_string(),
                            index: *index,
                            len,
                        });
                    }
                    let slot = (offset + index) as u32;
                    (Key::Input(slot), Instr::Input(slot))
                }
                ExprKind::Unary(op, c) => {
                    let r = self.by_node[&c.id()];
                    (Key::Unary(*op, r), Instr::Unary(*op, r))
                }
                ExprKind::Binary(op, a, b) => {
                    let ra = self.by_node[&a.id()];
                    let rb = self.by_node[&b.id()];
                    (Key::Binary(*op, ra, rb), Instr::Binary(*op, ra, rb))
                }
            };
            let reg = match self.dedup.get(&key) {
                Some(&r) => r,
                None => {
                    let r = self.tape.len() as u32;
                    self.tape.push(instr);
                    self.dedup.insert(key, r);
                    r
                }
            };
            self.by_node.insert(e.id(), reg);
        }
        Ok(self.by_node[&root.id()])
    }
}

/// Compiles `outputs` against the ordered input groups `inputs`.
pub fn compile(outputs: &[Output], inputs: &[(&str, usize)]) -> Result<CompiledPlan, SymError> {
    let mut input_offsets = HashMap::new();
    let mut offset = 0;
    for &(name, len) in inputs {
        if input_offsets.insert(name.to_string(), (offset, len)).is_some() {
            return Err(SymError::DuplicateGroup(name.to_string()));
        }
        offset += len;
    }
    let mut c = Compiler {
        tape: Vec::new(),
        dedup: HashMap::new(),
        by_node: HashMap::new(),
        input_offsets,
    };
    let mut output_layout = Vec::with_capacity(outputs.len());
    let mut output_regs = Vec::new();
    for out in outputs {
        output_layout.push(OutputSlot {
            name: out.name.clone(),
            shape: out.shape,
            offset: output_regs.len(),
        });
        for e in &out.entries {
            output_regs.push(c.lower(e)?);
        }
    }
    Ok(CompiledPlan {
        tape: c.tape,
        input_layout: inputs.iter().map(|&(n, l)| (n.to_string(), l)).collect(),
        output_layout,
        output_regs,
        input_len: offset,
    })
}

impl CompiledPlan {
    pub fn tape(&self) -> &[Instr] {
        &self.tape
    }

    pub fn input_layout(&self) -> &[(String, usize)] {
        &self.input_layout
    }

    pub fn output_layout(&self) -> &[OutputSlot] {
        &self.output_layout
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_regs.len()
    }

    pub fn output_slot(&self, name: &str) -> Option<&OutputSlot> {
        self.output_layout.iter().find(|s| s.name == name)
    }

    pub fn new_scratch(&self) -> Vec<f64> {
        vec![0.0; self.tape.len()]
    }

    /// Evaluates the tape. `inputs` is the concatenation of all input groups
    /// in layout order; `scratch` must hold at least one value per
    /// instruction.
    pub fn eval_into(&self, inputs: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        assert_eq!(inputs.len(), self.input_len, "input vector length");
        assert!(scratch.len() >= self.tape.len(), "scratch buffer too small");
        assert_eq!(out.len(), self.output_regs.len(), "output buffer length");
        for (i, instr) in self.tape.iter().enumerate() {
            scratch[i] = match *instr {
                Instr::Const(c) => c,
                Instr::Input(s) => inputs[s as usize],
                Instr::Unary(op, a) => op.apply(scratch[a as usize]),
                Instr::Binary(op, a, b) => op.apply(scratch[a as usize], scratch[b as usize]),
            };
        }
        for (o, &r) in out.iter_mut().zip(&self.output_regs) {
            *o = scratch[r as usize];
        }
    }

    pub fn eval(&self, inputs: &[f64]) -> Vec<f64> {
        let mut scratch = self.new_scratch();
        let mut out = vec![0.0; self.output_len()];
        self.eval_into(inputs, &mut scratch, &mut out);
        out
    }

    /// Flattens named bindings into the input layout and evaluates.
    pub fn eval_bindings(&self, bindings: &Bindings) -> Result<Vec<f64>, SymError> {
        let mut inputs = Vec::with_capacity(self.input_len);
        for (name, len) in &self.input_layout {
            let values = bindings
                .get(name)
                .ok_or_else(|| SymError::UnboundInput(name.clone()))?;
            if values.len() != *len {
                return Err(SymError::InputIndex {
                    group: name.clone(),
                    index: values.len(),
                    len: *len,
                });
            }
            inputs.extend_from_slice(values);
        }
        Ok(self.eval(&inputs))
    }
}
