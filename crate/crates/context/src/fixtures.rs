//! Reference entities for tests and demo data.

use serde_json::json;

use crate::entity::ContextEntity;
use crate::geo::GeoPoint;

/// The piezometer device from the public query example.
pub fn device_015() -> ContextEntity {
    ContextEntity::new("urn:ngsi-ld:Device:015")
        .expect("valid URN")
        .with_property("alternateName", json!("Multiple sensors for Sounding Place 06Z11"))
        .with_property("areaServed", json!("Mar Menor"))
        .with_relationship("controlledAsset", &["urn:ngsi-ld:SoundingPlace:003"])
        .with_property(
            "controlledProperty",
            json!(["tds", "conductivity", "piezometricLevel", "salinity", "temperature"]),
        )
        .with_property("dateLastValueReported", json!("2024-06-02T23:55:00Z"))
        .with_property(
            "description",
            json!("Device from Piezometric Net, belonging to the Sounding Place 06Z11"),
        )
        .with_property("deviceCategory", json!("sensor"))
        .with_property(
            "address",
            json!({
                "addressCountry": "ES",
                "addressRegion": "Murcia",
                "addressLocality": "Avenida de Munoz Zambudio, Los Alcazares, Cartagena",
                "postalCode": "30710"
            }),
        )
        .with_property(
            "source",
            json!("https://saihweb.chsegura.es/apps/iVisor/visor_variable.php?punto=06Z11E10"),
        )
        .with_property("name", json!("Device 015 found in 06Z11"))
        .with_location(GeoPoint { lat: 37.7543, lon: -0.8588 })
}
