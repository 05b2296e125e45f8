//! Fixed country → region lookup.
//!
//! Countries are keyed by ISO-3166 alpha-3 code. The table is the single
//! source of truth for region/country consistency checks during ingestion:
//! a code absent here is an unknown country and its row is rejected.
//!
//! Regional boundaries follow the seven-region scheme used throughout the
//! crate; North African countries are grouped with the Middle East, and
//! "Africa" means Sub-Saharan Africa.

use super::Region;

/// Sorted (code, region) pairs; kept sorted so lookup can binary-search.
const COUNTRY_REGIONS: &[(&str, Region)] = &[
    ("AFG", Region::SouthAsia),
    ("AGO", Region::Africa),
    ("ALB", Region::EuropeCentralAsia),
    ("ARE", Region::MiddleEast),
    ("ARG", Region::LatinAmerica),
    ("ARM", Region::EuropeCentralAsia),
    ("AUS", Region::EastAsiaPacific),
    ("AUT", Region::EuropeCentralAsia),
    ("AZE", Region::EuropeCentralAsia),
    ("BDI", Region::Africa),
    ("BEL", Region::EuropeCentralAsia),
    ("BEN", Region::Africa),
    ("BFA", Region::Africa),
    ("BGD", Region::SouthAsia),
    ("BGR", Region::EuropeCentralAsia),
    ("BIH", Region::EuropeCentralAsia),
    ("BLR", Region::EuropeCentralAsia),
    ("BOL", Region::LatinAmerica),
    ("BRA", Region::LatinAmerica),
    ("BTN", Region::SouthAsia),
    ("BWA", Region::Africa),
    ("CAN", Region::NorthAmerica),
    ("CHE", Region::EuropeCentralAsia),
    ("CHL", Region::LatinAmerica),
    ("CHN", Region::EastAsiaPacific),
    ("CIV", Region::Africa),
    ("CMR", Region::Africa),
    ("COD", Region::Africa),
    ("COG", Region::Africa),
    ("COL", Region::LatinAmerica),
    ("CRI", Region::LatinAmerica),
    ("CUB", Region::LatinAmerica),
    ("CZE", Region::EuropeCentralAsia),
    ("DEU", Region::EuropeCentralAsia),
    ("DNK", Region::EuropeCentralAsia),
    ("DOM", Region::LatinAmerica),
    ("DZA", Region::MiddleEast),
    ("ECU", Region::LatinAmerica),
    ("EGY", Region::MiddleEast),
    ("ESP", Region::EuropeCentralAsia),
    ("EST", Region::EuropeCentralAsia),
    ("ETH", Region::Africa),
    ("FIN", Region::EuropeCentralAsia),
    ("FJI", Region::EastAsiaPacific),
    ("FRA", Region::EuropeCentralAsia),
    ("GAB", Region::Africa),
    ("GBR", Region::EuropeCentralAsia),
    ("GEO", Region::EuropeCentralAsia),
    ("GHA", Region::Africa),
    ("GIN", Region::Africa),
    ("GRC", Region::EuropeCentralAsia),
    ("GTM", Region::LatinAmerica),
    ("HND", Region::LatinAmerica),
    ("HRV", Region::EuropeCentralAsia),
    ("HUN", Region::EuropeCentralAsia),
    ("IDN", Region::EastAsiaPacific),
    ("IND", Region::SouthAsia),
    ("IRL", Region::EuropeCentralAsia),
    ("IRN", Region::MiddleEast),
    ("IRQ", Region::MiddleEast),
    ("ISL", Region::EuropeCentralAsia),
    ("ISR", Region::MiddleEast),
    ("ITA", Region::EuropeCentralAsia),
    ("JAM", Region::LatinAmerica),
    ("JOR", Region::MiddleEast),
    ("JPN", Region::EastAsiaPacific),
    ("KAZ", Region::EuropeCentralAsia),
    ("KEN", Region::Africa),
    ("KGZ", Region::EuropeCentralAsia),
    ("KHM", Region::EastAsiaPacific),
    ("KOR", Region::EastAsiaPacific),
    ("KWT", Region::MiddleEast),
    ("LAO", Region::EastAsiaPacific),
    ("LBN", Region::MiddleEast),
    ("LBR", Region::Africa),
    ("LBY", Region::MiddleEast),
    ("LKA", Region::SouthAsia),
    ("LSO", Region::Africa),
    ("LTU", Region::EuropeCentralAsia),
    ("LUX", Region::EuropeCentralAsia),
    ("LVA", Region::EuropeCentralAsia),
    ("MAR", Region::MiddleEast),
    ("MDA", Region::EuropeCentralAsia),
    ("MDG", Region::Africa),
    ("MDV", Region::SouthAsia),
    ("MEX", Region::LatinAmerica),
    ("MKD", Region::EuropeCentralAsia),
    ("MLI", Region::Africa),
    ("MMR", Region::EastAsiaPacific),
    ("MNG", Region::EastAsiaPacific),
    ("MOZ", Region::Africa),
    ("MWI", Region::Africa),
    ("MYS", Region::EastAsiaPacific),
    ("NAM", Region::Africa),
    ("NER", Region::Africa),
    ("NGA", Region::Africa),
    ("NIC", Region::LatinAmerica),
    ("NLD", Region::EuropeCentralAsia),
    ("NOR", Region::EuropeCentralAsia),
    ("NPL", Region::SouthAsia),
    ("NZL", Region::EastAsiaPacific),
    ("OMN", Region::MiddleEast),
    ("PAK", Region::SouthAsia),
    ("PAN", Region::LatinAmerica),
    ("PER", Region::LatinAmerica),
    ("PHL", Region::EastAsiaPacific),
    ("PNG", Region::EastAsiaPacific),
    ("POL", Region::EuropeCentralAsia),
    ("PRK", Region::EastAsiaPacific),
    ("PRT", Region::EuropeCentralAsia),
    ("PRY", Region::LatinAmerica),
    ("QAT", Region::MiddleEast),
    ("ROU", Region::EuropeCentralAsia),
    ("RUS", Region::EuropeCentralAsia),
    ("RWA", Region::Africa),
    ("SAU", Region::MiddleEast),
    ("SDN", Region::Africa),
    ("SEN", Region::Africa),
    ("SLE", Region::Africa),
    ("SLV", Region::LatinAmerica),
    ("SRB", Region::EuropeCentralAsia),
    ("SVK", Region::EuropeCentralAsia),
    ("SVN", Region::EuropeCentralAsia),
    ("SWE", Region::EuropeCentralAsia),
    ("SWZ", Region::Africa),
    ("SYR", Region::MiddleEast),
    ("TCD", Region::Africa),
    ("TGO", Region::Africa),
    ("THA", Region::EastAsiaPacific),
    ("TJK", Region::EuropeCentralAsia),
    ("TKM", Region::EuropeCentralAsia),
    ("TTO", Region::LatinAmerica),
    ("TUN", Region::MiddleEast),
    ("TUR", Region::EuropeCentralAsia),
    ("TZA", Region::Africa),
    ("UGA", Region::Africa),
    ("UKR", Region::EuropeCentralAsia),
    ("URY", Region::LatinAmerica),
    ("USA", Region::NorthAmerica),
    ("UZB", Region::EuropeCentralAsia),
    ("VEN", Region::LatinAmerica),
    ("VNM", Region::EastAsiaPacific),
    ("YEM", Region::MiddleEast),
    ("ZAF", Region::Africa),
    ("ZMB", Region::Africa),
    ("ZWE", Region::Africa),
];

/// Looks up the region of an ISO-3166 alpha-3 country code.
/// Returns `None` for unknown codes.
pub fn region_of(country: &str) -> Option<Region> {
    COUNTRY_REGIONS
        .binary_search_by(|(code, _)| (*code).cmp(country))
        .ok()
        .map(|i| COUNTRY_REGIONS[i].1)
}

/// All known country codes, sorted (used by the synthetic generator to pick
/// stable per-country streams).
pub fn known_countries() -> impl Iterator<Item = &'static str> {
    COUNTRY_REGIONS.iter().map(|(code, _)| *code)
}
