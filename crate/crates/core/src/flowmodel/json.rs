use serde::{Deserialize, Serialize};

use crate::int::Int;
use crate::pwl::{Extended, PwlConvex};

use super::network::{Arc, ArcId, Capacity, FlowNetwork, Node, NodeId};
use super::ParseError;

pub const INSTANCE_SCHEMA: &str = "flowbp.instance.v1";

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CostDto {
    Linear(Int),
    Pwl(Box<PwlConvex>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDto {
    id: NodeId,
    #[serde(default)]
    demand: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcDto {
    id: ArcId,
    tail: NodeId,
    head: NodeId,
    capacity: Capacity,
    cost: CostDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDto {
    #[serde(default)]
    schema: Option<String>,
    nodes: Vec<NodeDto>,
    arcs: Vec<ArcDto>,
}

pub fn to_json_value(network: &FlowNetwork) -> serde_json::Value {
    let dto = InstanceDto {
        schema: Some(INSTANCE_SCHEMA.to_string()),
        nodes: network.nodes().iter().map(|n| NodeDto { id: n.id, demand: n.demand }).collect(),
        arcs: network
            .arcs()
            .iter()
            .map(|a| ArcDto {
                id: a.id,
                tail: a.tail,
                head: a.head,
                capacity: a.capacity,
                cost: match a.linear_cost() {
                    Some(c) => CostDto::Linear(c.clone()),
                    None => CostDto::Pwl(Box::new(a.cost.clone())),
                },
            })
            .collect(),
    };
    serde_json::to_value(dto).expect("instance serializes")
}

/// Canonical JSON text of a network, pretty-printed.
pub fn to_json(network: &FlowNetwork) -> String {
    serde_json::to_string_pretty(&to_json_value(network)).expect("instance serializes")
}

pub fn from_json(text: &str) -> Result<FlowNetwork, ParseError> {
    let dto: InstanceDto = serde_json::from_str(text)?;
    if let Some(s) = &dto.schema {
        if s != INSTANCE_SCHEMA {
            return Err(ParseError::Inconsistent(format!("unsupported schema {s:?}")));
        }
    }
    let nodes = dto.nodes.into_iter().map(|n| Node { id: n.id, demand: n.demand }).collect();
    let arcs = dto
        .arcs
        .into_iter()
        .map(|a| {
            let cost = match a.cost {
                CostDto::Linear(c) => {
                    if matches!(a.capacity, Capacity::Finite(u) if u < 0) {
                        return Err(ParseError::Invalid(super::ModelError::NegativeCapacity(a.id)));
                    }
                    PwlConvex::linear(c, Extended::from(0), a.capacity.as_extended()).expect("valid domain")
                }
                CostDto::Pwl(f) => *f,
            };
            Ok(Arc { id: a.id, tail: a.tail, head: a.head, capacity: a.capacity, cost })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FlowNetwork::new(nodes, arcs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;

    #[test]
    fn roundtrip_linear() {
        let net = triangle();
        let text = to_json(&net);
        assert!(text.contains("\"schema\": \"flowbp.instance.v1\""));
        assert_eq!(from_json(&text).unwrap(), net);
    }

    #[test]
    fn pwl_cost_and_unbounded() {
        let text = r#"{"nodes":[{"id":1,"demand":2},{"id":2,"demand":-2}],
            "arcs":[{"id":1,"tail":1,"head":2,"capacity":"inf",
                     "cost":{"breakpoints":[0,1,"inf"],"slopes":[1,4],"anchor":[0,0]}}]}"#;
        let net = from_json(text).unwrap();
        assert_eq!(net.c_max(), &Int::from(4));
        assert_eq!(from_json(&to_json(&net)).unwrap(), net);
    }

    #[test]
    fn rejects_domain_mismatch() {
        let text = r#"{"nodes":[{"id":1},{"id":2}],
            "arcs":[{"id":1,"tail":1,"head":2,"capacity":3,
                     "cost":{"breakpoints":[0,1,2],"slopes":[1,4],"anchor":[0,0]}}]}"#;
        assert!(matches!(from_json(text), Err(ParseError::Invalid(_))));
    }
}
