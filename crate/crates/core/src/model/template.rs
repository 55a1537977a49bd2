use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::function::ResourceFunction;
use super::substrate::{NodeId, SubstrateNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArcId(pub usize);

/// A template component: ordered inputs and outputs, CPU and memory load
/// functions, and one rate function per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    pub cpu: ResourceFunction,
    pub mem: ResourceFunction,
    pub out: Vec<ResourceFunction>,
    pub source: bool,
}

impl Component {
    /// Source component: no inputs, one output, zero resource use.
    pub fn source(name: impl Into<String>) -> Self {
        Component {
            name: name.into(),
            inputs: 0,
            outputs: 1,
            cpu: ResourceFunction::zero(0),
            mem: ResourceFunction::zero(0),
            out: vec![ResourceFunction::zero(0)],
            source: true,
        }
    }

    pub fn processing(
        name: impl Into<String>,
        cpu: ResourceFunction,
        mem: ResourceFunction,
        out: Vec<ResourceFunction>,
    ) -> Self {
        let inputs = cpu.inputs();
        Component { name: name.into(), inputs, outputs: out.len(), cpu, mem, out, source: false }
    }

    /// Output rates for the given input rates.
    pub fn output_rates(&self, inputs: &[f64]) -> Vec<f64> {
        self.out.iter().map(|f| f.eval(inputs)).collect()
    }

    pub fn is_affine(&self) -> bool {
        self.cpu.is_affine() && self.mem.is_affine() && self.out.iter().all(|f| f.is_affine())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arc {
    pub from: ComponentId,
    pub output: usize,
    pub to: ComponentId,
    pub input: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub components: Vec<Component>,
    pub arcs: Vec<Arc>,
}

/// Structural problem found by [`validate_template`].
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateIssue {
    Cycle { at: Vec<String> },
    DanglingArc { arc: usize, reason: String },
    SourceArity { component: String },
    SourceLoad { component: String },
    NoInputs { component: String },
    UnfedInput { component: String, input: usize },
    BadFunction { component: String, function: String, reason: String },
    DuplicateName { component: String },
    DuplicateArc { arc: usize },
}

impl fmt::Display for TemplateIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateIssue::Cycle { at } => write!(f, "cycle at {}", at.join(", ")),
            TemplateIssue::DanglingArc { arc, reason } => write!(f, "arc #{arc}: {reason}"),
            TemplateIssue::SourceArity { component } => {
                write!(f, "source arity violation at `{component}` (needs 0 inputs, 1 output)")
            }
            TemplateIssue::SourceLoad { component } => {
                write!(f, "source `{component}` must have zero CPU and memory load")
            }
            TemplateIssue::NoInputs { component } => write!(f, "processing component `{component}` has no inputs"),
            TemplateIssue::UnfedInput { component, input } => {
                write!(f, "input {input} of `{component}` is not the end of any arc")
            }
            TemplateIssue::BadFunction { component, function, reason } => {
                write!(f, "`{component}` {function}: {reason}")
            }
            TemplateIssue::DuplicateName { component } => write!(f, "duplicate component name `{component}`"),
            TemplateIssue::DuplicateArc { arc } => write!(f, "arc #{arc} duplicates an earlier arc"),
        }
    }
}

/// Returns every structural problem of the template; empty means valid.
pub fn validate_template(t: &Template) -> Vec<TemplateIssue> {
    let mut issues = Vec::new();
    let n = t.components.len();
    for (idx, c) in t.components.iter().enumerate() {
        if t.components[..idx].iter().any(|o| o.name == c.name) {
            issues.push(TemplateIssue::DuplicateName { component: c.name.clone() });
        }
        if c.source {
            if c.inputs != 0 || c.outputs != 1 {
                issues.push(TemplateIssue::SourceArity { component: c.name.clone() });
            }
            if !c.cpu.is_zero() || !c.mem.is_zero() {
                issues.push(TemplateIssue::SourceLoad { component: c.name.clone() });
            }
        } else if c.inputs == 0 {
            issues.push(TemplateIssue::NoInputs { component: c.name.clone() });
        }
        if c.out.len() != c.outputs {
            issues.push(TemplateIssue::BadFunction {
                component: c.name.clone(),
                function: "out".into(),
                reason: format!("{} output functions for {} outputs", c.out.len(), c.outputs),
            });
        }
        let named = [("cpu".to_string(), &c.cpu), ("mem".to_string(), &c.mem)];
        let outs = c.out.iter().enumerate().map(|(k, f)| (format!("out[{k}]"), f));
        for (label, func) in named.iter().map(|(l, f)| (l.clone(), *f)).chain(outs) {
            if let Err(reason) = func.check(c.inputs) {
                issues.push(TemplateIssue::BadFunction { component: c.name.clone(), function: label, reason });
            }
        }
    }

    let mut fed = vec![Vec::new(); n];
    for (idx, c) in t.components.iter().enumerate() {
        fed[idx] = vec![false; c.inputs];
    }
    for (ai, arc) in t.arcs.iter().enumerate() {
        let reason = if arc.from.0 >= n || arc.to.0 >= n {
            Some("unknown component".to_string())
        } else if arc.output >= t.components[arc.from.0].outputs {
            Some(format!("output {} does not exist on `{}`", arc.output, t.components[arc.from.0].name))
        } else if arc.input >= t.components[arc.to.0].inputs {
            Some(format!("input {} does not exist on `{}`", arc.input, t.components[arc.to.0].name))
        } else {
            None
        };
        match reason {
            Some(reason) => issues.push(TemplateIssue::DanglingArc { arc: ai, reason }),
            None => {
                if t.arcs[..ai].contains(arc) {
                    issues.push(TemplateIssue::DuplicateArc { arc: ai });
                }
                fed[arc.to.0][arc.input] = true;
            }
        }
    }
    for (idx, c) in t.components.iter().enumerate() {
        for (k, &ok) in fed[idx].iter().enumerate() {
            if !ok && !c.source {
                issues.push(TemplateIssue::UnfedInput { component: c.name.clone(), input: k });
            }
        }
    }
    if let Err(cyclic) = t.topo_order_lenient() {
        issues.push(TemplateIssue::Cycle { at: cyclic.iter().map(|c| t.components[c.0].name.clone()).collect() });
    }
    issues
}

impl Template {
    pub fn new(name: impl Into<String>) -> Self {
        Template { name: name.into(), components: Vec::new(), arcs: Vec::new() }
    }

    pub fn add_component(&mut self, c: Component) -> ComponentId {
        self.components.push(c);
        ComponentId(self.components.len() - 1)
    }

    pub fn connect(&mut self, from: ComponentId, output: usize, to: ComponentId, input: usize) -> ArcId {
        self.arcs.push(Arc { from, output, to, input });
        ArcId(self.arcs.len() - 1)
    }

    pub fn component(&self, id: ComponentId) -> &Component {
        &self.components[id.0]
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    pub fn component_by_name(&self, name: &str) -> Option<ComponentId> {
        self.components.iter().position(|c| c.name == name).map(ComponentId)
    }

    /// Whether traffic on this output leaves the service instead of
    /// following an arc.
    pub fn is_exit(&self, component: ComponentId, output: usize) -> bool {
        !self.arcs.iter().any(|a| a.from == component && a.output == output)
    }

    /// Arcs leaving output `output` of `component`, in declaration order.
    pub fn arcs_from(&self, component: ComponentId, output: usize) -> Vec<ArcId> {
        self.arcs
            .iter()
            .enumerate()
            .filter(|(_, a)| a.from == component && a.output == output)
            .map(|(i, _)| ArcId(i))
            .collect()
    }

    pub fn is_affine(&self) -> bool {
        self.components.iter().all(Component::is_affine)
    }

    /// Components in topological order, ties broken by ascending id.
    pub fn topo_order(&self) -> Result<Vec<ComponentId>> {
        self.topo_order_lenient().map_err(|cyclic| Error::Template {
            template: self.name.clone(),
            issues: format!("cycle through {} component(s)", cyclic.len()),
        })
    }

    fn topo_order_lenient(&self) -> std::result::Result<Vec<ComponentId>, Vec<ComponentId>> {
        let n = self.components.len();
        let mut indeg = vec![0usize; n];
        for a in self.arcs.iter().filter(|a| a.from.0 < n && a.to.0 < n) {
            indeg[a.to.0] += 1;
        }
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(c)) = ready.pop() {
            order.push(ComponentId(c));
            for a in self.arcs.iter().filter(|a| a.from.0 == c && a.to.0 < n) {
                indeg[a.to.0] -= 1;
                if indeg[a.to.0] == 0 {
                    ready.push(Reverse(a.to.0));
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        // Strip components that merely sit downstream of a cycle.
        let mut left: Vec<bool> = (0..n).map(|i| indeg[i] > 0).collect();
        loop {
            let sink =
                (0..n).find(|&c| left[c] && !self.arcs.iter().any(|a| a.from.0 == c && a.to.0 < n && left[a.to.0]));
            match sink {
                Some(c) => left[c] = false,
                None => break,
            }
        }
        Err((0..n).filter(|&i| left[i]).map(ComponentId).collect())
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let issues = validate_template(self);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Template {
                template: self.name.clone(),
                issues: issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            })
        }
    }
}

/// Traffic origin: an instance of source component `component` on `node`
/// emitting `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub node: NodeId,
    pub component: ComponentId,
    pub rate: f64,
}

/// A network service to embed: its template and its current sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Service {
    pub template: Template,
    pub sources: Vec<Source>,
}

impl Service {
    pub fn new(template: Template, sources: Vec<Source>) -> Self {
        Service { template, sources }
    }

    pub fn name(&self) -> &str {
        &self.template.name
    }

    pub fn validate(&self, substrate: &SubstrateNetwork) -> Result<()> {
        self.template.ensure_valid()?;
        let fail = |reason: String| Error::Service { service: self.template.name.clone(), reason };
        for (i, s) in self.sources.iter().enumerate() {
            if s.node.0 >= substrate.node_count() {
                return Err(fail(format!("source #{i} on unknown node {}", s.node.0)));
            }
            match self.template.components.get(s.component.0) {
                Some(c) if c.source => {}
                _ => return Err(fail(format!("source #{i} does not reference a source component"))),
            }
            if !(s.rate.is_finite() && s.rate > 0.0) {
                return Err(fail(format!("source #{i} needs a positive rate")));
            }
            if self.sources[..i].iter().any(|o| o.node == s.node && o.component == s.component) {
                return Err(fail(format!("source #{i} duplicates an earlier (node, component) pair")));
            }
        }
        Ok(())
    }

    pub fn total_rate(&self) -> f64 {
        self.sources.iter().map(|s| s.rate).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Template {
        let mut t = Template::new("chain");
        let s = t.add_component(Component::source("S"));
        let a = t.add_component(Component::processing(
            "A",
            ResourceFunction::affine(1.0, &[1.0]),
            ResourceFunction::affine(1.0, &[0.0]),
            vec![ResourceFunction::affine(0.0, &[1.0])],
        ));
        let b = t.add_component(Component::processing(
            "B",
            ResourceFunction::affine(1.0, &[1.0]),
            ResourceFunction::affine(1.0, &[0.0]),
            vec![],
        ));
        t.connect(s, 0, a, 0);
        t.connect(a, 0, b, 0);
        t
    }

    #[test]
    fn minimal_chain_is_valid() {
        assert_eq!(validate_template(&chain()), vec![]);
        assert_eq!(chain().topo_order().unwrap(), vec![ComponentId(0), ComponentId(1), ComponentId(2)]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut t = chain();
        let a = t.component_by_name("A").unwrap();
        // give A a second input fed by itself
        let c = &mut t.components[a.0];
        c.inputs = 2;
        c.cpu = ResourceFunction::affine(1.0, &[1.0, 1.0]);
        c.mem = ResourceFunction::affine(1.0, &[0.0, 0.0]);
        c.out = vec![ResourceFunction::affine(0.0, &[1.0, 1.0])];
        t.connect(a, 0, a, 1);
        let issues = validate_template(&t);
        assert_eq!(issues, vec![TemplateIssue::Cycle { at: vec!["A".into()] }]);
        assert!(issues[0].to_string().contains("cycle at A"));
    }

    #[test]
    fn source_with_two_outputs() {
        let mut t = chain();
        t.components[0].outputs = 2;
        t.components[0].out.push(ResourceFunction::zero(0));
        let issues = validate_template(&t);
        assert!(issues.contains(&TemplateIssue::SourceArity { component: "S".into() }));
    }

    #[test]
    fn dangling_and_unfed() {
        let mut t = chain();
        t.arcs[1].input = 3;
        let issues = validate_template(&t);
        assert!(issues.iter().any(|i| matches!(i, TemplateIssue::DanglingArc { arc: 1, .. })));
        assert!(issues.contains(&TemplateIssue::UnfedInput { component: "B".into(), input: 0 }));
        assert_eq!(issues.len(), 2);
    }

    #[test]
    fn service_source_checks() {
        let mut net = SubstrateNetwork::new();
        let v = net.add_node("v", 1.0, 1.0).unwrap();
        let t = chain();
        let ok = Service::new(t.clone(), vec![Source { node: v, component: ComponentId(0), rate: 1.0 }]);
        assert!(ok.validate(&net).is_ok());
        let dup = Service::new(
            t.clone(),
            vec![
                Source { node: v, component: ComponentId(0), rate: 1.0 },
                Source { node: v, component: ComponentId(0), rate: 2.0 },
            ],
        );
        assert!(dup.validate(&net).is_err());
        let not_src = Service::new(t, vec![Source { node: v, component: ComponentId(1), rate: 1.0 }]);
        assert!(not_src.validate(&net).is_err());
    }
}
