use std::collections::{HashMap, HashSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use sqlparser::ast::{
    BinaryOperator, Expr, JoinConstraint, JoinOperator, ObjectName, Query, Select, Statement, TableFactor, Visit,
    Visitor,
};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::Parser;

/// An equality predicate between columns of two different table occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left_table: String,
    pub left_column: String,
    pub right_table: String,
    pub right_column: String,
}

impl JoinEdge {
    pub fn new(lt: &str, lc: &str, rt: &str, rc: &str) -> Self {
        JoinEdge {
            left_table: lt.to_string(),
            left_column: lc.to_string(),
            right_table: rt.to_string(),
            right_column: rc.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryAnalysis {
    /// Tables as written in the query, first spelling wins, in order of appearance.
    pub referenced_tables: Vec<String>,
    pub join_edges: Vec<JoinEdge>,
    pub parse_ok: bool,
    pub parse_error: Option<String>,
}

impl QueryAnalysis {
    fn failed(msg: String) -> Self {
        QueryAnalysis { parse_ok: false, parse_error: Some(msg), ..Default::default() }
    }

    pub fn references(&self, table: &str) -> bool {
        self.referenced_tables.iter().any(|t| t.eq_ignore_ascii_case(table))
    }
}

/// Extracts referenced tables and column-equality join predicates from SQL.
///
/// Aliases are resolved per SELECT scope (outer scopes are consulted for
/// correlated subqueries). CTE names and derived tables are not reported as
/// tables. Malformed SQL yields `parse_ok = false` with the parser message.
pub fn analyze_query(sql: &str) -> QueryAnalysis {
    let statements = match Parser::parse_sql(&GenericDialect {}, sql) {
        Ok(s) => s,
        Err(e) => return QueryAnalysis::failed(e.to_string()),
    };
    if statements.is_empty() {
        return QueryAnalysis::failed("no SQL statement found".into());
    }
    let mut collector = Collector::default();
    collector.scopes.push(Scope::default());
    for stmt in &statements {
        let _ = stmt.visit(&mut collector);
    }
    // Leftover root-level predicates (e.g. DELETE ... WHERE) resolve here.
    collector.close_scope();
    collector.finish()
}

#[derive(Debug, Clone)]
enum Side {
    Resolved(usize),
    Qualified(String),
    Unqualified,
}

#[derive(Debug, Clone)]
struct Pending {
    left: (Side, String),
    right: (Side, String),
}

#[derive(Debug, Default)]
struct Scope {
    // alias or table name (lowercase) -> occurrence id; None for derived/CTE
    names: HashMap<String, Option<usize>>,
    occurrences: Vec<usize>,
    opaque: usize,
    pending: Vec<Pending>,
}

#[derive(Debug, Default)]
struct Collector {
    occurrences: Vec<String>,
    scopes: Vec<Scope>,
    ctes: Vec<HashSet<String>>,
    edges: Vec<JoinEdge>,
}

impl Collector {
    fn is_cte(&self, name: &str) -> bool {
        self.ctes.iter().any(|s| s.contains(name))
    }

    fn scope(&mut self) -> &mut Scope {
        self.scopes.last_mut().expect("root scope")
    }

    fn register_table(&mut self, name: &ObjectName, alias: Option<&str>) {
        let Some(table) = name.0.last().and_then(|p| p.as_ident()).map(|i| i.value.clone()) else {
            return;
        };
        let key = table.to_lowercase();
        if name.0.len() == 1 && self.is_cte(&key) {
            let scope = self.scope();
            scope.opaque += 1;
            scope.names.insert(alias.map(str::to_lowercase).unwrap_or(key), None);
            return;
        }
        let id = self.occurrences.len();
        self.occurrences.push(table);
        let scope = self.scope();
        scope.occurrences.push(id);
        if let Some(a) = alias {
            scope.names.insert(a.to_lowercase(), Some(id));
        }
        scope.names.entry(key).or_insert(Some(id));
    }

    fn resolve_in(&self, scope: &Scope, side: &Side) -> Option<Option<usize>> {
        match side {
            Side::Resolved(id) => Some(Some(*id)),
            Side::Qualified(q) => scope.names.get(q).copied(),
            Side::Unqualified => {
                if scope.occurrences.len() == 1 && scope.opaque == 0 {
                    Some(Some(scope.occurrences[0]))
                } else {
                    Some(None)
                }
            }
        }
    }

    fn close_scope(&mut self) {
        let Some(scope) = self.scopes.pop() else { return };
        let mut deferred = Vec::new();
        for p in &scope.pending {
            let l = self.resolve_in(&scope, &p.left.0);
            let r = self.resolve_in(&scope, &p.right.0);
            match (l, r) {
                (Some(Some(a)), Some(Some(b))) => self.emit(a, &p.left.1, b, &p.right.1),
                (Some(None), _) | (_, Some(None)) => {}
                (l, r) => {
                    let fix = |res: Option<Option<usize>>, side: &Side| match res {
                        Some(Some(id)) => Side::Resolved(id),
                        _ => side.clone(),
                    };
                    deferred.push(Pending {
                        left: (fix(l, &p.left.0), p.left.1.clone()),
                        right: (fix(r, &p.right.0), p.right.1.clone()),
                    });
                }
            }
        }
        if let Some(parent) = self.scopes.last_mut() {
            parent.pending.extend(deferred);
        }
    }

    fn emit(&mut self, a: usize, ac: &str, b: usize, bc: &str) {
        if a == b {
            return;
        }
        let edge = JoinEdge::new(&self.occurrences[a], ac, &self.occurrences[b], bc);
        if !self.edges.contains(&edge) {
            self.edges.push(edge);
        }
    }

    fn finish(self) -> QueryAnalysis {
        let mut referenced: Vec<String> = Vec::new();
        for t in self.occurrences {
            if !referenced.iter().any(|r| r.eq_ignore_ascii_case(&t)) {
                referenced.push(t);
            }
        }
        QueryAnalysis { referenced_tables: referenced, join_edges: self.edges, parse_ok: true, parse_error: None }
    }
}

fn column_ref(expr: &Expr) -> Option<(Side, String)> {
    match expr {
        Expr::Nested(inner) => column_ref(inner),
        Expr::Identifier(id) => Some((Side::Unqualified, id.value.clone())),
        Expr::CompoundIdentifier(parts) if parts.len() >= 2 => {
            let col = parts[parts.len() - 1].value.clone();
            let qual = parts[parts.len() - 2].value.to_lowercase();
            Some((Side::Qualified(qual), col))
        }
        _ => None,
    }
}

fn factor_key(f: &TableFactor) -> Option<String> {
    match f {
        TableFactor::Table { name, alias, .. } => match alias {
            Some(a) => Some(a.name.value.to_lowercase()),
            None => name.0.last().and_then(|p| p.as_ident()).map(|i| i.value.to_lowercase()),
        },
        TableFactor::Derived { alias: Some(a), .. } => Some(a.name.value.to_lowercase()),
        _ => None,
    }
}

fn using_columns(op: &JoinOperator) -> Option<&Vec<ObjectName>> {
    let constraint = match op {
        JoinOperator::Join(c)
        | JoinOperator::Inner(c)
        | JoinOperator::Left(c)
        | JoinOperator::LeftOuter(c)
        | JoinOperator::Right(c)
        | JoinOperator::RightOuter(c)
        | JoinOperator::FullOuter(c) => c,
        _ => return None,
    };
    match constraint {
        JoinConstraint::Using(cols) => Some(cols),
        _ => None,
    }
}

impl Visitor for Collector {
    type Break = ();

    fn pre_visit_statement(&mut self, _s: &Statement) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn pre_visit_query(&mut self, query: &Query) -> ControlFlow<()> {
        let names = query
            .with
            .iter()
            .flat_map(|w| w.cte_tables.iter())
            .map(|cte| cte.alias.name.value.to_lowercase())
            .collect();
        self.ctes.push(names);
        ControlFlow::Continue(())
    }

    fn post_visit_query(&mut self, _q: &Query) -> ControlFlow<()> {
        self.ctes.pop();
        ControlFlow::Continue(())
    }

    fn pre_visit_select(&mut self, _s: &Select) -> ControlFlow<()> {
        self.scopes.push(Scope::default());
        ControlFlow::Continue(())
    }

    fn post_visit_select(&mut self, select: &Select) -> ControlFlow<()> {
        for twj in &select.from {
            let mut prev = factor_key(&twj.relation);
            for join in &twj.joins {
                let key = factor_key(&join.relation);
                if let (Some(l), Some(r), Some(cols)) = (&prev, &key, using_columns(&join.join_operator)) {
                    for col in cols {
                        if let Some(c) = col.0.last().and_then(|p| p.as_ident()) {
                            self.scope().pending.push(Pending {
                                left: (Side::Qualified(l.clone()), c.value.clone()),
                                right: (Side::Qualified(r.clone()), c.value.clone()),
                            });
                        }
                    }
                }
                prev = key;
            }
        }
        self.close_scope();
        ControlFlow::Continue(())
    }

    fn pre_visit_table_factor(&mut self, factor: &TableFactor) -> ControlFlow<()> {
        match factor {
            TableFactor::Table { name, alias, args: None, .. } => {
                self.register_table(name, alias.as_ref().map(|a| a.name.value.as_str()));
            }
            TableFactor::Derived { alias, .. } => {
                let scope = self.scope();
                scope.opaque += 1;
                if let Some(a) = alias {
                    scope.names.insert(a.name.value.to_lowercase(), None);
                }
            }
            TableFactor::Table { .. } => self.scope().opaque += 1,
            _ => {}
        }
        ControlFlow::Continue(())
    }

    fn pre_visit_expr(&mut self, expr: &Expr) -> ControlFlow<()> {
        if let Expr::BinaryOp { left, op: BinaryOperator::Eq, right } = expr {
            if let (Some(l), Some(r)) = (column_ref(left), column_ref(right)) {
                self.scope().pending.push(Pending { left: l, right: r });
            }
        }
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRUNABLE: &str = "SELECT CONCAT(Fname, ' ', LName) AS full_student_name
FROM dorm_1_Student d, pets_1_Has_Pet hp, pets_1_Pets p
WHERE d.StuID = hp.StuID AND hp.PetID = p.PetID
       AND p.PetType = 'Cat'";

    #[test]
    fn prunable_listing_edges() {
        let a = analyze_query(PRUNABLE);
        assert!(a.parse_ok);
        assert_eq!(a.referenced_tables, ["dorm_1_Student", "pets_1_Has_Pet", "pets_1_Pets"]);
        assert_eq!(
            a.join_edges,
            vec![
                JoinEdge::new("dorm_1_Student", "StuID", "pets_1_Has_Pet", "StuID"),
                JoinEdge::new("pets_1_Has_Pet", "PetID", "pets_1_Pets", "PetID"),
            ]
        );
    }

    #[test]
    fn single_table_count() {
        let a = analyze_query("SELECT count(*) FROM college_students;");
        assert_eq!(a.referenced_tables, ["college_students"]);
        assert!(a.join_edges.is_empty());
    }

    #[test]
    fn malformed_sql_reports_error() {
        let a = analyze_query("SELEC x FRM t");
        assert!(!a.parse_ok);
        assert!(a.parse_error.is_some());
        assert!(a.referenced_tables.is_empty());
    }

    #[test]
    fn explicit_join_on_with_aliases() {
        let a = analyze_query(
            "SELECT a.author_id, COUNT(b.book_id) AS total_sales FROM authors a \
             JOIN book_orders b ON a.author_id = b.book_author \
             WHERE a.author_name LIKE 'M%' AND b.purchase_date > '2020-01-01' \
             GROUP BY a.author_id ORDER BY total_sales DESC",
        );
        assert_eq!(a.referenced_tables, ["authors", "book_orders"]);
        assert_eq!(a.join_edges, vec![JoinEdge::new("authors", "author_id", "book_orders", "book_author")]);
    }

    #[test]
    fn literal_predicates_are_not_joins() {
        let a = analyze_query("SELECT * FROM t, u WHERE t.x = 5 AND u.y = 'a'");
        assert!(a.join_edges.is_empty());
        assert_eq!(a.referenced_tables.len(), 2);
    }

    #[test]
    fn subquery_scopes_and_correlation() {
        let a = analyze_query(
            "SELECT s.name FROM student s WHERE EXISTS \
             (SELECT 1 FROM takes t WHERE t.ID = s.ID)",
        );
        assert_eq!(a.referenced_tables, ["student", "takes"]);
        assert_eq!(a.join_edges, vec![JoinEdge::new("takes", "ID", "student", "ID")]);
    }

    #[test]
    fn correlated_subquery_in_projection_resolves_late() {
        let a = analyze_query("SELECT (SELECT count(*) FROM takes t WHERE t.ID = s.ID) AS n FROM student s");
        assert_eq!(a.join_edges, vec![JoinEdge::new("takes", "ID", "student", "ID")]);
    }

    #[test]
    fn cte_and_derived_tables_are_not_tables() {
        let a = analyze_query(
            "WITH top AS (SELECT id FROM x) SELECT * FROM top JOIN y ON top.id = y.id \
             JOIN (SELECT id FROM z) d ON d.id = y.id",
        );
        assert_eq!(a.referenced_tables, ["x", "y", "z"]);
        assert!(a.join_edges.is_empty());
    }

    #[test]
    fn window_functions_parse() {
        let a = analyze_query(
            "SELECT region, name, RANK() OVER (PARTITION BY region ORDER BY visits DESC) AS r \
             FROM groups g JOIN regions r2 ON g.region_id = r2.id",
        );
        assert!(a.parse_ok, "{:?}", a.parse_error);
        assert_eq!(a.join_edges.len(), 1);
    }

    #[test]
    fn using_clause_becomes_edge() {
        let a = analyze_query("SELECT * FROM a JOIN b USING (id)");
        assert_eq!(a.join_edges, vec![JoinEdge::new("a", "id", "b", "id")]);
    }

    #[test]
    fn self_join_on_distinct_occurrences_is_an_edge_but_same_occurrence_is_not() {
        let a = analyze_query("SELECT * FROM emp e1, emp e2 WHERE e1.boss = e2.id AND e1.id = e1.id");
        assert_eq!(a.join_edges, vec![JoinEdge::new("emp", "boss", "emp", "id")]);
    }

    #[test]
    fn unqualified_columns_resolve_only_with_one_table() {
        let a = analyze_query("SELECT * FROM t WHERE x = y");
        assert!(a.join_edges.is_empty());
        let b = analyze_query("SELECT * FROM t, u WHERE x = y");
        assert!(b.join_edges.is_empty());
    }
}
