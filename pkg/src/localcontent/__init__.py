"""Local content of bipartite qubit and qutrit correlations."""
