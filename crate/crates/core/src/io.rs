//! JSON file formats. Files name nodes and components; the library uses
//! dense indices, so readers resolve names against the network and the
//! templates.
//!
//! * network: `{"nodes": [{"name", "cpu", "mem"}], "links": [{"src", "dst",
//!   "rate", "delay", "duplex"?}]}`; a duplex entry adds both directions.
//! * template: `{"name", "components": [...], "arcs": [{"from", "output"?,
//!   "to", "input"?}]}`. A component is either `{"name", "source": true}` or
//!   `{"name", "cpu", "mem", "out": [...]}` with resource functions written
//!   as `{"constant", "coefficients": [c, {"pieces": [...]}, ...]}`.
//! * sources: `[{"service"?, "node", "component"?, "rate"}]`; `service` and
//!   `component` may be left out when there is only one candidate.
//! * configuration: services with template, sources, instances and edges;
//!   edge routing is a list of `{"link": index, "rate"}`.
//! * scenario: templates, an optional network (inline, a path, or
//!   `{"generate": {"nodes", "avg_degree", "seed"}}`) and events.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ArcId, Component, ComponentId, ConfigurationScore, InstanceId, LinkId, Overlay, ResourceFunction, ServiceState,
    Source, SubstrateNetwork, SystemConfiguration, Template,
};
use crate::scenario::{generate_substrate, Event};

fn parse_err(what: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{what}: {e}"))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSpec {
    name: String,
    cpu: f64,
    mem: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSpec {
    src: String,
    dst: String,
    rate: f64,
    delay: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    duplex: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    nodes: Vec<NodeSpec>,
    #[serde(default)]
    links: Vec<LinkSpec>,
}

fn network_from_file(f: NetworkFile) -> Result<SubstrateNetwork> {
    let mut net = SubstrateNetwork::new();
    for n in f.nodes {
        net.add_node(n.name, n.cpu, n.mem)?;
    }
    for (i, l) in f.links.iter().enumerate() {
        let find = |name: &str| {
            net.node_by_name(name).ok_or_else(|| Error::Parse(format!("link #{i}: unknown node `{name}`")))
        };
        let (a, b) = (find(&l.src)?, find(&l.dst)?);
        if l.duplex {
            net.add_duplex(a, b, l.rate, l.delay)?;
        } else {
            net.add_link(a, b, l.rate, l.delay)?;
        }
    }
    Ok(net)
}

pub fn parse_network(text: &str) -> Result<SubstrateNetwork> {
    network_from_file(serde_json::from_str(text).map_err(|e| parse_err("network", e))?)
}

pub fn network_to_json(net: &SubstrateNetwork) -> String {
    let f = NetworkFile {
        nodes: net.nodes().iter().map(|n| NodeSpec { name: n.name.clone(), cpu: n.cpu, mem: n.mem }).collect(),
        links: net
            .links()
            .iter()
            .map(|l| LinkSpec {
                src: net.node(l.src).name.clone(),
                dst: net.node(l.dst).name.clone(),
                rate: l.rate,
                delay: l.delay,
                duplex: false,
            })
            .collect(),
    };
    to_json(&f)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentSpec {
    name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    source: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpu: Option<ResourceFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mem: Option<ResourceFunction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    out: Vec<ResourceFunction>,
    /// Needed only when neither `cpu` nor `mem` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inputs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcSpec {
    from: String,
    #[serde(default)]
    output: usize,
    to: String,
    #[serde(default)]
    input: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    name: String,
    components: Vec<ComponentSpec>,
    #[serde(default)]
    arcs: Vec<ArcSpec>,
}

fn template_from_file(f: TemplateFile) -> Result<Template> {
    let mut t = Template::new(f.name);
    for c in f.components {
        if c.source {
            t.add_component(Component::source(c.name));
            continue;
        }
        let inputs = c
            .inputs
            .or(c.cpu.as_ref().map(ResourceFunction::inputs))
            .or(c.mem.as_ref().map(ResourceFunction::inputs))
            .unwrap_or(0);
        let cpu = c.cpu.unwrap_or_else(|| ResourceFunction::zero(inputs));
        let mem = c.mem.unwrap_or_else(|| ResourceFunction::zero(inputs));
        let mut comp = Component::processing(c.name, cpu, mem, c.out);
        comp.inputs = inputs;
        t.add_component(comp);
    }
    for (i, a) in f.arcs.iter().enumerate() {
        let find = |name: &str| {
            t.component_by_name(name)
                .ok_or_else(|| Error::Parse(format!("template `{}` arc #{i}: unknown component `{name}`", t.name)))
        };
        let (from, to) = (find(&a.from)?, find(&a.to)?);
        t.connect(from, a.output, to, a.input);
    }
    Ok(t)
}

fn template_to_file(t: &Template) -> TemplateFile {
    let components = t
        .components
        .iter()
        .map(|c| {
            if c.source {
                ComponentSpec { name: c.name.clone(), source: true, cpu: None, mem: None, out: vec![], inputs: None }
            } else {
                ComponentSpec {
                    name: c.name.clone(),
                    source: false,
                    cpu: Some(c.cpu.clone()),
                    mem: Some(c.mem.clone()),
                    out: c.out.clone(),
                    inputs: None,
                }
            }
        })
        .collect();
    let arcs = t
        .arcs
        .iter()
        .map(|a| ArcSpec {
            from: t.component(a.from).name.clone(),
            output: a.output,
            to: t.component(a.to).name.clone(),
            input: a.input,
        })
        .collect();
    TemplateFile { name: t.name.clone(), components, arcs }
}

/// Parses a template without validating it; see `validate_template`.
pub fn parse_template(text: &str) -> Result<Template> {
    template_from_file(serde_json::from_str(text).map_err(|e| parse_err("template", e))?)
}

pub fn template_to_json(t: &Template) -> String {
    to_json(&template_to_file(t))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service: Option<String>,
    node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    component: Option<String>,
    rate: f64,
}

fn resolve_source(spec: &SourceSpec, net: &SubstrateNetwork, t: &Template) -> Result<Source> {
    let node =
        net.node_by_name(&spec.node).ok_or_else(|| Error::Parse(format!("source: unknown node `{}`", spec.node)))?;
    let component = match &spec.component {
        Some(name) => t
            .component_by_name(name)
            .ok_or_else(|| Error::Parse(format!("source: template `{}` has no component `{name}`", t.name)))?,
        None => {
            let mut sources = t.components.iter().enumerate().filter(|(_, c)| c.source);
            match (sources.next(), sources.next()) {
                (Some((j, _)), None) => ComponentId(j),
                _ => {
                    return Err(Error::Parse(format!(
                        "source on `{}`: template `{}` needs an explicit component",
                        spec.node, t.name
                    )))
                }
            }
        }
    };
    Ok(Source { node, component, rate: spec.rate })
}

fn source_to_spec(s: &Source, net: &SubstrateNetwork, t: &Template, service: Option<&str>) -> SourceSpec {
    SourceSpec {
        service: service.map(str::to_string),
        node: net.node(s.node).name.clone(),
        component: Some(t.component(s.component).name.clone()),
        rate: s.rate,
    }
}

/// Sources per service name. Entries without `service` belong to the only
/// template.
pub fn parse_sources(
    text: &str,
    net: &SubstrateNetwork,
    templates: &[Template],
) -> Result<BTreeMap<String, Vec<Source>>> {
    let specs: Vec<SourceSpec> = serde_json::from_str(text).map_err(|e| parse_err("sources", e))?;
    let mut out: BTreeMap<String, Vec<Source>> = templates.iter().map(|t| (t.name.clone(), Vec::new())).collect();
    for spec in &specs {
        let t = match &spec.service {
            Some(name) => templates
                .iter()
                .find(|t| &t.name == name)
                .ok_or_else(|| Error::Parse(format!("source: unknown service `{name}`")))?,
            None if templates.len() == 1 => &templates[0],
            None => return Err(Error::Parse("source without `service` but several templates given".into())),
        };
        out.get_mut(&t.name).expect("service entry").push(resolve_source(spec, net, t)?);
    }
    Ok(out)
}

pub fn sources_to_json(net: &SubstrateNetwork, services: &[(&Template, &[Source])]) -> String {
    let many = services.len() > 1;
    let specs: Vec<SourceSpec> = services
        .iter()
        .flat_map(|(t, srcs)| srcs.iter().map(move |s| source_to_spec(s, net, t, many.then_some(t.name.as_str()))))
        .collect();
    to_json(&specs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceSpec {
    component: String,
    node: String,
    #[serde(default)]
    in_rates: Vec<f64>,
    #[serde(default)]
    out_rates: Vec<f64>,
    #[serde(default)]
    cpu: f64,
    #[serde(default)]
    mem: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteSpec {
    link: usize,
    rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSpec {
    arc: usize,
    /// Index into the service's instance list.
    from: usize,
    to: usize,
    rate: f64,
    #[serde(default)]
    routing: Vec<RouteSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceFile {
    template: TemplateFile,
    #[serde(default)]
    sources: Vec<SourceSpec>,
    #[serde(default)]
    instances: Vec<InstanceSpec>,
    #[serde(default)]
    edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigurationFile {
    services: BTreeMap<String, ServiceFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<ConfigurationScore>,
}

/// Serializes a configuration, optionally with its score. The network is
/// not included; readers pass it separately.
pub fn configuration_to_json(cfg: &SystemConfiguration, score: Option<&ConfigurationScore>) -> String {
    let net = &cfg.substrate;
    let services = cfg
        .services
        .iter()
        .map(|(name, s)| {
            let t = &s.template;
            let ids: Vec<InstanceId> = s.overlay.instances().map(|i| i.id).collect();
            let instances = s
                .overlay
                .instances()
                .map(|i| InstanceSpec {
                    component: t.component(i.component).name.clone(),
                    node: net.node(i.node).name.clone(),
                    in_rates: i.in_rates.clone(),
                    out_rates: i.out_rates.clone(),
                    cpu: i.cpu_load,
                    mem: i.mem_load,
                })
                .collect();
            let pos = |id: InstanceId| ids.iter().position(|&x| x == id).expect("edge endpoint");
            let edges = s
                .overlay
                .edges()
                .map(|e| EdgeSpec {
                    arc: e.arc.0,
                    from: pos(e.src),
                    to: pos(e.dst),
                    rate: e.rate,
                    routing: e.routing.links.iter().map(|(l, &r)| RouteSpec { link: l.0, rate: r }).collect(),
                })
                .collect();
            let sources = s.sources.iter().map(|src| source_to_spec(src, net, t, None)).collect();
            (name.clone(), ServiceFile { template: template_to_file(t), sources, instances, edges })
        })
        .collect();
    to_json(&ConfigurationFile { services, score: score.cloned() })
}

/// Reads a configuration on `net`. Rates and loads are recomputed from the
/// edges, so the stored per-instance values are informational.
pub fn parse_configuration(text: &str, net: &SubstrateNetwork) -> Result<SystemConfiguration> {
    let f: ConfigurationFile = serde_json::from_str(text).map_err(|e| parse_err("configuration", e))?;
    let mut cfg = SystemConfiguration::empty(net.clone());
    for (name, s) in f.services {
        let template = template_from_file(s.template)?;
        let ctx = |m: String| Error::Parse(format!("configuration `{name}`: {m}"));
        let sources = s.sources.iter().map(|spec| resolve_source(spec, net, &template)).collect::<Result<Vec<_>>>()?;
        let mut overlay = Overlay::new();
        let mut ids = Vec::new();
        for i in &s.instances {
            let c = template
                .component_by_name(&i.component)
                .ok_or_else(|| ctx(format!("unknown component `{}`", i.component)))?;
            let v = net.node_by_name(&i.node).ok_or_else(|| ctx(format!("unknown node `{}`", i.node)))?;
            ids.push(overlay.add_instance(&template, c, v));
        }
        for (k, e) in s.edges.iter().enumerate() {
            let (Some(&src), Some(&dst)) = (ids.get(e.from), ids.get(e.to)) else {
                return Err(ctx(format!("edge #{k} references a missing instance")));
            };
            if e.arc >= template.arcs.len() {
                return Err(ctx(format!("edge #{k} references unknown arc {}", e.arc)));
            }
            let id = overlay.add_edge(ArcId(e.arc), src, dst);
            let edge = overlay.edge_mut(id).expect("new edge");
            edge.rate = e.rate;
            for r in &e.routing {
                if r.link >= net.link_count() {
                    return Err(ctx(format!("edge #{k} routes over unknown link {}", r.link)));
                }
                edge.routing.add(LinkId(r.link), r.rate);
            }
        }
        cfg.services.insert(name, ServiceState { template, sources, overlay });
    }
    cfg.propagate_rates()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NetworkRef {
    Path(String),
    Generate { generate: GenerateSpec },
    Inline(NetworkFile),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateSpec {
    nodes: usize,
    avg_degree: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TemplateRef {
    Path(String),
    Inline(TemplateFile),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum EventSpec {
    ServiceAdd {
        service: String,
        template: String,
        #[serde(default)]
        sources: Vec<SourceSpec>,
    },
    ServiceRemove {
        service: String,
    },
    SourceAdd {
        service: String,
        node: String,
        #[serde(default)]
        component: Option<String>,
        rate: f64,
    },
    SourceRemove {
        service: String,
        node: String,
        #[serde(default)]
        component: Option<String>,
    },
    SourceRateChange {
        service: String,
        node: String,
        #[serde(default)]
        component: Option<String>,
        rate: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    network: Option<NetworkRef>,
    templates: Vec<TemplateRef>,
    #[serde(default)]
    events: Vec<EventSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub network: SubstrateNetwork,
    pub templates: Vec<Template>,
    pub events: Vec<Event>,
}

/// Reads a scenario. Relative paths inside it are resolved against
/// `base_dir`; `network` overrides the scenario's own network.
pub fn parse_scenario(text: &str, base_dir: &Path, network: Option<SubstrateNetwork>) -> Result<ScenarioSpec> {
    let f: ScenarioFile = serde_json::from_str(text).map_err(|e| parse_err("scenario", e))?;
    let net = match (network, f.network) {
        (Some(n), _) => n,
        (None, Some(NetworkRef::Path(p))) => parse_network(&read_file(&base_dir.join(p))?)?,
        (None, Some(NetworkRef::Generate { generate: g })) => generate_substrate(g.nodes, g.avg_degree, g.seed)?,
        (None, Some(NetworkRef::Inline(n))) => network_from_file(n)?,
        (None, None) => return Err(Error::Parse("scenario: no network given".into())),
    };
    let templates = f
        .templates
        .into_iter()
        .map(|r| match r {
            TemplateRef::Path(p) => parse_template(&read_file(&base_dir.join(p))?),
            TemplateRef::Inline(t) => template_from_file(t),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut service_template: BTreeMap<String, usize> = BTreeMap::new();
    let mut events = Vec::new();
    for (index, e) in f.events.into_iter().enumerate() {
        let fail = |reason: String| Error::Event { index, reason };
        let template_of = |service: &str, map: &BTreeMap<String, usize>| {
            map.get(service).map(|&i| &templates[i]).ok_or_else(|| fail(format!("service `{service}` was never added")))
        };
        let source_of = |t: &Template, node: String, component: Option<String>, rate: f64| {
            resolve_source(&SourceSpec { service: None, node, component, rate }, &net, t)
                .map_err(|e| fail(e.to_string()))
        };
        let event = match e {
            EventSpec::ServiceAdd { service, template, sources } => {
                let ti = templates
                    .iter()
                    .position(|t| t.name == template)
                    .ok_or_else(|| fail(format!("unknown template `{template}`")))?;
                let sources = sources
                    .into_iter()
                    .map(|s| source_of(&templates[ti], s.node, s.component, s.rate))
                    .collect::<Result<Vec<_>>>()?;
                service_template.insert(service.clone(), ti);
                Event::AddService { service, template, sources }
            }
            EventSpec::ServiceRemove { service } => Event::RemoveService { service },
            EventSpec::SourceAdd { service, node, component, rate } => {
                let source = source_of(template_of(&service, &service_template)?, node, component, rate)?;
                Event::AddSource { service, source }
            }
            EventSpec::SourceRemove { service, node, component } => {
                let s = source_of(template_of(&service, &service_template)?, node, component, 1.0)?;
                Event::RemoveSource { service, node: s.node, component: s.component }
            }
            EventSpec::SourceRateChange { service, node, component, rate } => {
                let s = source_of(template_of(&service, &service_template)?, node, component, rate)?;
                Event::ChangeRate { service, node: s.node, component: s.component, rate }
            }
        };
        events.push(event);
    }
    Ok(ScenarioSpec { network: net, templates, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{illustrative_network, security_chain};
    use crate::heuristic::{embed, HeuristicParams};
    use crate::model::{validate_template, NodeId, PiecewiseTerm, Service};

    #[test]
    fn network_round_trip() {
        let net = illustrative_network();
        assert_eq!(parse_network(&network_to_json(&net)).unwrap(), net);
    }

    #[test]
    fn duplex_links_and_unknown_nodes() {
        let net = parse_network(
            r#"{"nodes": [{"name": "a", "cpu": 1, "mem": 2}, {"name": "b", "cpu": 3, "mem": 4}],
                "links": [{"src": "a", "dst": "b", "rate": 5, "delay": 1, "duplex": true}]}"#,
        )
        .unwrap();
        assert_eq!(net.link_count(), 2);
        let bad = r#"{"nodes": [{"name": "a", "cpu": 1, "mem": 2}], "links": [{"src": "a", "dst": "z", "rate": 1, "delay": 1}]}"#;
        assert!(matches!(parse_network(bad), Err(Error::Parse(_))));
        assert!(matches!(parse_network("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn template_round_trip_with_piecewise() {
        let mut t = security_chain();
        t.components[2].cpu.terms[0] = crate::model::InputTerm::Piecewise(PiecewiseTerm::step(3.0, 0.0, 1.0));
        assert_eq!(parse_template(&template_to_json(&t)).unwrap(), t);
    }

    #[test]
    fn template_shorthand() {
        let t = parse_template(
            r#"{"name": "t", "components": [
                {"name": "S", "source": true},
                {"name": "A", "cpu": {"constant": 1, "coefficients": [2]}, "out": []}],
                "arcs": [{"from": "S", "to": "A"}]}"#,
        )
        .unwrap();
        assert!(validate_template(&t).is_empty());
        assert_eq!(t.components[1].inputs, 1);
        assert_eq!(t.components[1].mem, ResourceFunction::zero(1));
    }

    #[test]
    fn sources_resolution() {
        let net = illustrative_network();
        let t = security_chain();
        let m = parse_sources(r#"[{"node": "3", "rate": 4}]"#, &net, std::slice::from_ref(&t)).unwrap();
        assert_eq!(m["security"], vec![Source { node: NodeId(2), component: ComponentId(0), rate: 4.0 }]);
        assert!(parse_sources(r#"[{"node": "11", "rate": 4}]"#, &net, std::slice::from_ref(&t)).is_err());
        let json = sources_to_json(&net, &[(&t, &m["security"])]);
        assert_eq!(parse_sources(&json, &net, &[t]).unwrap(), m);
    }

    #[test]
    fn configuration_round_trip() {
        let net = illustrative_network();
        let svc =
            Service::new(security_chain(), vec![Source { node: NodeId(0), component: ComponentId(0), rate: 45.0 }]);
        let cfg = embed(&SystemConfiguration::empty(net.clone()), &[svc], &HeuristicParams::default()).unwrap();
        let back = parse_configuration(&configuration_to_json(&cfg, None), &net).unwrap();
        assert_eq!(back.instance_count(), cfg.instance_count());
        assert_eq!(
            crate::model::score(&back, None, crate::model::Weights { m1: 1e6, m2: 1e3 }),
            crate::model::score(&cfg, None, crate::model::Weights { m1: 1e6, m2: 1e3 })
        );
    }

    #[test]
    fn scenario_parsing() {
        let text = r#"{
            "network": {"generate": {"nodes": 6, "avg_degree": 2.0, "seed": 1}},
            "templates": [{"name": "t", "components": [
                {"name": "S", "source": true},
                {"name": "A", "cpu": {"constant": 0, "coefficients": [1]}, "out": []}],
                "arcs": [{"from": "S", "to": "A"}]}],
            "events": [
                {"kind": "service-add", "service": "one", "template": "t", "sources": [{"node": "v0", "rate": 2}]},
                {"kind": "source-rate-change", "service": "one", "node": "v0", "rate": 3},
                {"kind": "source-remove", "service": "one", "node": "v0"},
                {"kind": "service-remove", "service": "one"}]}"#;
        let s = parse_scenario(text, Path::new("."), None).unwrap();
        assert_eq!(s.network.node_count(), 6);
        assert_eq!(s.events.len(), 4);
        assert_eq!(
            s.events[1],
            Event::ChangeRate { service: "one".into(), node: NodeId(0), component: ComponentId(0), rate: 3.0 }
        );
        let bad = text
            .replace(r#""service": "one", "node": "v0", "rate": 3"#, r#""service": "two", "node": "v0", "rate": 3"#);
        assert!(matches!(parse_scenario(&bad, Path::new("."), None), Err(Error::Event { index: 1, .. })));
    }
}
