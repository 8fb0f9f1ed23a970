//! The base-station bridge: a pub/sub hub reachable over framed TCP and a
//! WebSocket gateway for browser viewers.

mod client;
mod hub;
mod server;

pub use client::{BridgeClient, ClientOptions};
pub use hub::{
    default_topics, Delivery, Hub, HubError, Session, SessionId, TopicSpec, Transport,
    TOPIC_CAMERA, TOPIC_CLOUD, TOPIC_MODE, TOPIC_POSE, TOPIC_TAGS, TOPIC_TWIST,
};
pub use server::{BridgeConfig, BridgeHandle, DEFAULT_TCP_PORT, DEFAULT_WS_PORT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointcloud::ShadingMode;
use crate::wire::{monotonic_ns, Body, SubscribeAction, WireError, WireMessage};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error("gateway: {0}")]
    Gateway(String),
    #[error("connection closed")]
    Closed,
}

/// JSON control messages accepted on the gateway's text channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GatewayOp {
    Subscribe {
        topic: String,
    },
    Unsubscribe {
        topic: String,
    },
    Twist {
        linear: f64,
        angular: f64,
    },
    /// Shading parameters flattened next to `"op"`, for example
    /// `{"op":"mode","mode":"natural_color","near_cutoff":2,"far_cutoff":4}`.
    Mode(ShadingMode),
    Ping,
}

/// Replies sent on the gateway's text channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GatewayReply {
    Subscribed { topic: String },
    Unsubscribed { topic: String },
    Ok,
    Pong,
    Error { message: String },
}

/// Applies a client-originated gateway op to the hub.
pub fn apply_gateway_op(hub: &Hub, session: SessionId, op: GatewayOp) -> GatewayReply {
    let result = match op {
        GatewayOp::Subscribe { topic } => hub
            .subscribe(session, &topic)
            .map(|_| GatewayReply::Subscribed { topic }),
        GatewayOp::Unsubscribe { topic } => hub
            .unsubscribe(session, &topic)
            .map(|_| GatewayReply::Unsubscribed { topic }),
        GatewayOp::Twist { linear, angular } => hub
            .route_teleop(WireMessage::twist(monotonic_ns(), linear, angular))
            .map(|_| GatewayReply::Ok),
        GatewayOp::Mode(mode) => match mode.validate() {
            Ok(()) => hub
                .publish_routed(WireMessage::new(
                    monotonic_ns(),
                    "viewer",
                    Body::ModeChange { mode },
                ))
                .map(|_| GatewayReply::Ok),
            Err(e) => {
                return GatewayReply::Error {
                    message: e.to_string(),
                }
            }
        },
        GatewayOp::Ping => Ok(GatewayReply::Pong),
    };
    result.unwrap_or_else(|e| GatewayReply::Error {
        message: e.to_string(),
    })
}

/// Applies a framed message received from a client: subscriptions, role
/// announcements, teleop and publishing. Heartbeats are no-ops here.
pub fn apply_inbound(hub: &Hub, session: &Session, msg: WireMessage) -> Result<(), HubError> {
    match msg.body {
        Body::Heartbeat => Ok(()),
        Body::Hello { role, .. } => {
            session.set_role(role);
            Ok(())
        }
        Body::Subscribe { action, ref topic } => match action {
            SubscribeAction::Subscribe => hub.subscribe(session.id(), topic).map(|_| ()),
            SubscribeAction::Unsubscribe => hub.unsubscribe(session.id(), topic).map(|_| ()),
        },
        Body::Twist { .. } => hub.route_teleop(msg).map(|_| ()),
        _ => hub.publish_routed(msg).map(|_| ()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::Role;

    #[test]
    fn gateway_ops_parse() {
        let op: GatewayOp =
            serde_json::from_str(r#"{"op":"subscribe","topic":"map/cloud"}"#).unwrap();
        assert_eq!(
            op,
            GatewayOp::Subscribe {
                topic: "map/cloud".into()
            }
        );
        let op: GatewayOp =
            serde_json::from_str(r#"{"op":"twist","linear":0.5,"angular":-1}"#).unwrap();
        assert_eq!(
            op,
            GatewayOp::Twist {
                linear: 0.5,
                angular: -1.0
            }
        );
        let op: GatewayOp = serde_json::from_str(
            r#"{"op":"mode","mode":"natural_color","near_cutoff":2,"far_cutoff":4}"#,
        )
        .unwrap();
        assert_eq!(
            op,
            GatewayOp::Mode(ShadingMode::natural_color(2.0, 4.0).unwrap())
        );
        assert!(serde_json::from_str::<GatewayOp>(r#"{"op":"launch"}"#).is_err());
        assert_eq!(
            serde_json::to_string(&GatewayReply::Subscribed { topic: "a".into() }).unwrap(),
            r#"{"op":"subscribed","topic":"a"}"#
        );
    }

    #[test]
    fn gateway_ops_apply() {
        let hub = Hub::with_default_topics();
        let s = hub.open_session(Role::Both, Transport::BrowserGateway);
        assert!(matches!(
            apply_gateway_op(
                &hub,
                s.id(),
                GatewayOp::Subscribe {
                    topic: TOPIC_TWIST.into()
                }
            ),
            GatewayReply::Subscribed { .. }
        ));
        assert!(matches!(
            apply_gateway_op(&hub, s.id(), GatewayOp::Subscribe { topic: "x".into() }),
            GatewayReply::Error { .. }
        ));
        apply_gateway_op(
            &hub,
            s.id(),
            GatewayOp::Twist {
                linear: 0.5,
                angular: 0.0,
            },
        );
        let d = s.try_recv().unwrap();
        assert!(matches!(d.msg.body, Body::Twist { linear, .. } if linear == 0.5));
        let bad = GatewayOp::Mode(ShadingMode::NaturalColor {
            near_cutoff: 4.0,
            far_cutoff: 2.0,
        });
        assert!(matches!(
            apply_gateway_op(&hub, s.id(), bad),
            GatewayReply::Error { .. }
        ));
        hub.subscribe(s.id(), TOPIC_MODE).unwrap();
        apply_gateway_op(&hub, s.id(), GatewayOp::Mode(ShadingMode::default_sonar()));
        assert!(matches!(
            s.try_recv().unwrap().msg.body,
            Body::ModeChange { .. }
        ));
    }
}
