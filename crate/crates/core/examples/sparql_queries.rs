// SPDX-License-Identifier: MIT OR Apache-2.0
//! Prints the SPARQL query issued for each entity category, in both entity
//! orderings. Nothing is sent over the network.
//!
//! Usage:
//!   cargo run --release --example sparql_queries -- [ENTITY_LIMIT]

use awarescope::dataset::{build_category_query, relations_for, Category, EntityOrder};

fn main() -> awarescope::Result<()> {
    let limit: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(250);

    for cat in Category::ALL {
        let rels = relations_for(cat);
        let keys: Vec<&str> = rels.iter().map(|r| r.relation_key.as_str()).collect();
        println!("# {cat}: {}", keys.join(", "));
        println!("{}", build_category_query(cat, &rels, limit, EntityOrder::SitelinksDesc)?);
    }

    // The unordered form skips the sitelinks subquery.
    let q = build_category_query(Category::Song, &relations_for(Category::Song), limit, EntityOrder::Unordered)?;
    println!("# song, unordered\n{q}");
    Ok(())
}
