use serde::{Deserialize, Serialize};

use super::CastoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GatewayInfo {
    pub name: String,
    pub endpoint: String,
    /// Seconds; meaningful only when `reachable`.
    #[serde(default)]
    pub last_rtt: f64,
    #[serde(default)]
    pub reachable: bool,
}

impl GatewayInfo {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        GatewayInfo {
            name: name.into(),
            endpoint: endpoint.into(),
            last_rtt: 0.0,
            reachable: false,
        }
    }

    /// `https://{name}` with no RTT measured yet.
    pub fn public(name: &str) -> Self {
        GatewayInfo::new(name, format!("https://{name}"))
    }
}

/// Measures round-trip time to a gateway in seconds; `None` when unreachable.
pub trait RttProbe {
    fn probe(&self, gateway: &GatewayInfo) -> Option<f64>;
}

impl<F: Fn(&GatewayInfo) -> Option<f64>> RttProbe for F {
    fn probe(&self, gateway: &GatewayInfo) -> Option<f64> {
        self(gateway)
    }
}

/// Probe answering from a fixed name → RTT table.
#[derive(Debug, Clone, Default)]
pub struct TableProbe(pub Vec<(String, f64)>);

impl RttProbe for TableProbe {
    fn probe(&self, gateway: &GatewayInfo) -> Option<f64> {
        self.0
            .iter()
            .find(|(name, _)| *name == gateway.name)
            .map(|(_, rtt)| *rtt)
    }
}

/// Re-probes every gateway, updating `last_rtt` and `reachable` in place.
pub fn probe_all(gateways: &mut [GatewayInfo], prober: &dyn RttProbe) {
    for gw in gateways.iter_mut() {
        match prober.probe(gw) {
            Some(rtt) if rtt > 0.0 && rtt.is_finite() => {
                gw.last_rtt = rtt;
                gw.reachable = true;
            }
            _ => {
                gw.reachable = false;
            }
        }
    }
}

/// Reachable gateway with the lowest RTT; ties go to the lexicographically
/// smallest name.
pub fn select_gateway(
    gateways: &[GatewayInfo],
    prober: &dyn RttProbe,
) -> Result<GatewayInfo, CastoreError> {
    let mut probed = gateways.to_vec();
    probe_all(&mut probed, prober);
    fastest(&probed)
}

/// Picks among already-probed gateways.
pub fn fastest(gateways: &[GatewayInfo]) -> Result<GatewayInfo, CastoreError> {
    gateways
        .iter()
        .filter(|g| g.reachable)
        .min_by(|a, b| {
            a.last_rtt
                .total_cmp(&b.last_rtt)
                .then_with(|| a.name.cmp(&b.name))
        })
        .cloned()
        .ok_or(CastoreError::NoGatewayReachable)
}

/// Public gateways with RTTs measured from a client in Hong Kong.
pub const PUBLIC_GATEWAY_RTTS: [(&str, &str, &str, f64); 21] = [
    ("ipfs.jbb.one", "47.52.139.252", "Hong Kong SAR", 0.04),
    ("ipfs.smartsignature.io", "13.231.230.12", "Tokyo, Japan", 0.07),
    ("10.via0.com", "104.27.129.45", "San Francisco, U.S.A", 0.13),
    ("ipfs.kavin.rocks", "104.28.5.229", "Dallas, U.S.A", 0.14),
    ("ipfs.runfission.com", "34.233.130.24", "Ashburn, U.S.A", 0.25),
    ("ipfs.k1ic.com", "39.101.143.85", "Beijing, China", 0.51),
    ("ipfs.2read.net", "195.201.149.81", "Gunzenhausen, DE", 0.55),
    ("ipfs.drink.cafe", "98.126.159.6", "Orange, U.S.A", 0.56),
    ("gateway.pinata.cloud", "165.227.144.202", "Frankfurt, Germany", 0.56),
    ("ipfs.telos.miami", "138.68.29.104", "Santa Clara, U.S.A", 0.57),
    ("hardbin.com", "174.138.8.194", "Amsterdam, NL", 0.57),
    ("ipfs.fleek.co", "44.240.5.243", "Portland, U.S.A", 0.57),
    ("ipfs.greyh.at", "35.208.63.54", "Council Bluffs, U.S.A", 0.69),
    ("gateway.temporal.cloud", "207.6.222.55", "Surrey, Canada", 0.70),
    ("ipfs.azurewebsites.net", "13.66.138.105", "Redmond, U.S.A", 0.72),
    ("ipfs.best-practice.se", "193.11.118.5", "Eskilstuna, Sweden", 0.73),
    ("ipfs.overpi.com", "66.228.43.184", "Cedar Knolls, U.S.A.", 0.74),
    ("jorropo.net", "163.172.31.60", "Paris, France", 0.76),
    ("jorropo.ovh", "51.75.127.200", "Roubaix, France", 0.76),
    ("ipfs.stibarc.com", "74.140.55.163", "Delaware, U.S.A", 0.81),
    ("ipfs.sloppyta.co", "51.68.154.205", "Warsaw, Poland", 0.83),
];

pub fn public_gateways() -> Vec<GatewayInfo> {
    PUBLIC_GATEWAY_RTTS
        .iter()
        .map(|(name, _, _, _)| GatewayInfo::public(name))
        .collect()
}

pub fn public_gateway_probe() -> TableProbe {
    TableProbe(
        PUBLIC_GATEWAY_RTTS
            .iter()
            .map(|(name, _, _, rtt)| (name.to_string(), *rtt))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn public_table_picks_hong_kong() {
        let chosen = select_gateway(&public_gateways(), &public_gateway_probe()).unwrap();
        assert_eq!(chosen.name, "ipfs.jbb.one");
        assert_eq!(chosen.last_rtt, 0.04);
    }

    #[test]
    fn single_reachable() {
        let gws = public_gateways();
        let probe = |g: &GatewayInfo| (g.name == "hardbin.com").then_some(0.57);
        assert_eq!(select_gateway(&gws, &probe).unwrap().name, "hardbin.com");
    }

    #[test]
    fn none_reachable() {
        let probe = |_: &GatewayInfo| None;
        assert!(matches!(
            select_gateway(&public_gateways(), &probe),
            Err(CastoreError::NoGatewayReachable)
        ));
        assert!(matches!(
            select_gateway(&[], &probe),
            Err(CastoreError::NoGatewayReachable)
        ));
    }

    #[test]
    fn ties_break_by_name() {
        // jorropo.net and jorropo.ovh share 0.76
        let gws: Vec<_> = ["jorropo.ovh", "jorropo.net"]
            .into_iter()
            .map(GatewayInfo::public)
            .collect();
        let chosen = select_gateway(&gws, &public_gateway_probe()).unwrap();
        assert_eq!(chosen.name, "jorropo.net");
    }

    #[test]
    fn non_positive_rtt_is_unreachable() {
        let gws = vec![GatewayInfo::public("a"), GatewayInfo::public("b")];
        let probe = |g: &GatewayInfo| if g.name == "a" { Some(0.0) } else { Some(0.3) };
        assert_eq!(select_gateway(&gws, &probe).unwrap().name, "b");
    }
}
