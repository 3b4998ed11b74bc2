#!/usr/bin/env python

#stdlib imports
import logging

#third party imports
import numpy as np
import pandas as pd
from scipy import sparse

#local imports
from .dataset import RegionFlowException,saveFrame

logger = logging.getLogger(__name__)

class FlowNetwork(object):
    """
    Undirected weighted network over zones, self-loops allowed.

    The adjacency matrix is kept in the matrix convention: A[i,j] = A[j,i] = w
    for an edge of weight w between distinct nodes, and A[i,i] = 2w for a
    self-loop of weight w.  Then k_i = sum_j A[i,j] and m = sum_ij A[i,j] / 2.
    """
    def __init__(self,nodes,matrix):
        """Construct a FlowNetwork.

        :param nodes:
          Sequence of node ids, in the order of the matrix rows.  Node ids must be unique.
        :param matrix:
          Square symmetric scipy.sparse matrix (or numpy array) in matrix convention.
        :raises RegionFlowException:
          When the matrix is not square, does not match the node list, is not
          symmetric or has negative weights.
        """
        nodes = list(nodes)
        if len(set(nodes)) != len(nodes):
            raise RegionFlowException('Network node ids must be unique.')
        matrix = sparse.csr_matrix(matrix,dtype=np.float64)
        if matrix.shape != (len(nodes),len(nodes)):
            raise RegionFlowException('Adjacency matrix shape %s does not match %i nodes.' %
                                      (str(matrix.shape),len(nodes)))
        if matrix.nnz and matrix.data.min() < 0:
            raise RegionFlowException('Edge weights must be nonnegative.')
        if (abs(matrix - matrix.T) > 0).nnz:
            raise RegionFlowException('Adjacency matrix must be symmetric.')
        matrix.eliminate_zeros()
        matrix.sort_indices()
        self._nodes = nodes
        self._index = dict([(node,i) for i,node in enumerate(nodes)])
        self._matrix = matrix
        self._degrees = np.asarray(matrix.sum(axis=1)).ravel()
        self._m = float(matrix.sum())/2.0

    @classmethod
    def fromEdges(cls,edges,nodes=None):
        """Build a network from (node_a,node_b,weight) triples.

        Repeated pairs are summed; a triple with node_a == node_b adds a self-loop.

        :param edges:
          Iterable of (node_a,node_b,weight) tuples.
        :param nodes:
          Optional sequence of node ids (isolated nodes allowed); defaults to
          the sorted set of nodes appearing in edges.
        :returns:
          FlowNetwork instance.
        """
        edges = list(edges)
        if nodes is None:
            allnodes = set()
            for a,b,w in edges:
                allnodes.add(a)
                allnodes.add(b)
            nodes = sorted(allnodes)
        index = dict([(node,i) for i,node in enumerate(nodes)])
        rows = []
        cols = []
        vals = []
        for a,b,w in edges:
            if a not in index or b not in index:
                raise RegionFlowException('Edge (%s,%s) references an unknown node.' % (a,b))
            i = index[a]
            j = index[b]
            if i == j:
                rows.append(i)
                cols.append(i)
                vals.append(2.0*w)
            else:
                rows.extend([i,j])
                cols.extend([j,i])
                vals.extend([w,w])
        n = len(nodes)
        matrix = sparse.coo_matrix((vals,(rows,cols)),shape=(n,n)).tocsr()
        return cls(nodes,matrix)

    #"magic" methods
    def __len__(self):
        return len(self._nodes)

    def __repr__(self):
        return 'FlowNetwork(%i nodes, m=%g)' % (len(self._nodes),self._m)

    def __eq__(self,other):
        if not isinstance(other,FlowNetwork):
            return False
        if self._nodes != other._nodes:
            return False
        return (abs(self._matrix - other._matrix) > 0).nnz == 0

    def getNodes(self):
        """Return the list of node ids (matrix row order).
        """
        return list(self._nodes)

    def getIndex(self,node):
        """Return the matrix row of a node id.

        :raises RegionFlowException:
          When the node is not in the network.
        """
        if node not in self._index:
            raise RegionFlowException('Node "%s" is not in the network.' % str(node))
        return self._index[node]

    def getMatrix(self):
        """Return the adjacency matrix (scipy.sparse CSR, matrix convention).
        """
        return self._matrix

    def getDegrees(self):
        """Return a numpy array of node degrees k_i.
        """
        return self._degrees.copy()

    def getDegree(self,node):
        return float(self._degrees[self.getIndex(node)])

    def getTotalWeight(self):
        """Return m, the total edge weight (self-loops counted once).
        """
        return self._m

    def getSelfLoops(self):
        """Return a numpy array of self-loop weights (A_ii / 2).
        """
        return self._matrix.diagonal()/2.0

    def getWeight(self,node_a,node_b):
        """Return the weight of the edge between two nodes (self-loop weight when equal).
        """
        i = self.getIndex(node_a)
        j = self.getIndex(node_b)
        value = float(self._matrix[i,j])
        if i == j:
            value = value/2.0
        return value

    def getNeighbors(self):
        """Return per-node neighbor lists.

        :returns:
          Tuple of (neighbors,selfloops) where neighbors[i] is a list of
          (j,w) pairs for distinct nodes j in ascending order and selfloops[i]
          is A_ii (twice the self-loop weight).
        """
        matrix = self._matrix
        neighbors = []
        indptr = matrix.indptr
        indices = matrix.indices
        data = matrix.data
        for i in range(len(self._nodes)):
            row = []
            for pos in range(indptr[i],indptr[i+1]):
                j = int(indices[pos])
                if j != i:
                    row.append((j,float(data[pos])))
            neighbors.append(row)
        return neighbors,[float(x) for x in matrix.diagonal()]

    def getEdges(self):
        """Return the distinct edges as a pandas DataFrame.

        :returns:
          DataFrame with columns node_a, node_b, weight; one row per unordered
          pair (node_a precedes node_b in node order) and one row per self-loop.
        """
        upper = sparse.triu(self._matrix).tocoo()
        order = np.lexsort((upper.col,upper.row))
        rows = upper.row[order]
        cols = upper.col[order]
        weights = upper.data[order].copy()
        weights[rows == cols] = weights[rows == cols]/2.0
        return pd.DataFrame({'node_a':[self._nodes[i] for i in rows],
                             'node_b':[self._nodes[j] for j in cols],
                             'weight':weights})

    def save(self,prefix,comment=None):
        """Write the network as two ASCII files, one for nodes and one for edges.

        :param prefix:
          Output prefix; files are <prefix>_nodes.csv and <prefix>_edges.csv.
        :param comment:
          Optional comment line for both files.
        :returns:
          Tuple of the two file names.
        """
        nodefile = prefix + '_nodes.csv'
        edgefile = prefix + '_edges.csv'
        nodes = pd.DataFrame({'node_id':self._nodes,'degree':self._degrees})
        saveFrame(nodes,nodefile,comment=comment)
        saveFrame(self.getEdges(),edgefile,comment=comment)
        return (nodefile,edgefile)

    @classmethod
    def load(cls,prefix):
        """Read a network written by save().
        """
        nodes = pd.read_csv(prefix + '_nodes.csv',dtype={'node_id':str},keep_default_na=False,comment='#')
        edges = pd.read_csv(prefix + '_edges.csv',dtype={'node_a':str,'node_b':str},
                            keep_default_na=False,comment='#')
        triples = zip(edges['node_a'],edges['node_b'],edges['weight'].astype(float))
        return cls.fromEdges(triples,nodes=nodes['node_id'].tolist())

def buildNetwork(table,roster=None):
    """Build the undirected zone network from a FlowTable.

    Each directed flow patient_zone -> hospital is mapped to the hospital's
    home zone; flows in both directions between a pair of zones are summed
    into one undirected edge, and flows within a zone become a self-loop.

    :param table:
      FlowTable instance.
    :param roster:
      HospitalRoster supplying hospital home zones.  When None, the
      hospital_zone column of the table is used as ingested.
    :returns:
      FlowNetwork whose nodes are the sorted patient and hospital zones.
    :raises RegionFlowException:
      When a hospital in the table is missing from the roster.
    """
    df = table.getData()
    if roster is not None:
        homezones = roster.getHomeZones().to_dict()
        missing = sorted(set(df['hospital_id']) - set(homezones))
        if len(missing):
            raise RegionFlowException('Hospital "%s" is missing from the hospital roster.' % missing[0],
                                      code='missing_hospital',details={'hospitals':missing})
        hzones = df['hospital_id'].map(homezones)
    else:
        hzones = df['hospital_zone']
        if (hzones == '').any():
            bad = sorted(set(df['hospital_id'][hzones == '']))
            raise RegionFlowException('Hospital "%s" has no home zone.' % bad[0],
                                      code='missing_hospital',details={'hospitals':bad})
    pzones = df['patient_zone'].values
    hzones = np.asarray(hzones.values,dtype=object)
    nodes = sorted(set(pzones) | set(hzones))
    index = dict([(node,i) for i,node in enumerate(nodes)])
    n = len(nodes)
    rows = np.array([index[z] for z in pzones],dtype=np.int64)
    cols = np.array([index[z] for z in hzones],dtype=np.int64)
    counts = df['count'].values.astype(np.float64)
    #directed flow matrix F; A = F + F^T puts 2w on the diagonal for same-zone flows
    flows = sparse.coo_matrix((counts,(rows,cols)),shape=(n,n)).tocsr()
    matrix = flows + flows.T
    network = FlowNetwork(nodes,matrix)
    logger.info('Built network with %i nodes and total weight %g' % (n,network.getTotalWeight()))
    return network
