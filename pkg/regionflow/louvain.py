#!/usr/bin/env python

#stdlib imports
from collections import OrderedDict
import json
import logging
import warnings

#third party imports
import numpy as np
import pandas as pd
from scipy import sparse

#local imports
from .dataset import RegionFlowException,RegionFlowWarning,saveFrame
from .network import FlowNetwork

ORDER_SORTED = 'sorted'
ORDER_SHUFFLE = 'shuffle'
MAX_SWEEPS = 1000

logger = logging.getLogger(__name__)

class Partition(object):
    """
    Assignment of nodes (zones or super-nodes) to communities labelled 0..C-1.
    """
    def __init__(self,nodes,labels,densify=True):
        """Construct a Partition.

        :param nodes:
          Sequence of unique node ids.
        :param labels:
          Sequence of integer labels, one per node.
        :param densify:
          If True, labels are renumbered 0..C-1 in order of first appearance
          along the node sequence.  If False, labels must already be dense.
        :raises RegionFlowException:
          When nodes repeat, lengths differ, or labels are not dense.
        """
        nodes = list(nodes)
        labels = np.asarray(labels,dtype=np.int64).ravel()
        if len(nodes) != len(labels):
            raise RegionFlowException('Partition has %i nodes but %i labels.' % (len(nodes),len(labels)))
        if len(set(nodes)) != len(nodes):
            raise RegionFlowException('Partition node ids must be unique.')
        if densify:
            mapping = {}
            dense = np.empty(len(labels),dtype=np.int64)
            for i,label in enumerate(labels):
                if label not in mapping:
                    mapping[label] = len(mapping)
                dense[i] = mapping[label]
            labels = dense
        elif len(labels):
            used = np.unique(labels)
            if used[0] != 0 or used[-1] != len(used)-1:
                raise RegionFlowException('Partition labels must be 0..C-1 with every label used.')
        self._nodes = nodes
        self._labels = labels
        self._index = dict([(node,i) for i,node in enumerate(nodes)])

    @classmethod
    def fromDict(cls,mapping,densify=True):
        """Create a Partition from a dictionary of node -> label (nodes sorted).
        """
        nodes = sorted(mapping.keys())
        return cls(nodes,[mapping[node] for node in nodes],densify=densify)

    @classmethod
    def singletons(cls,nodes):
        nodes = list(nodes)
        return cls(nodes,np.arange(len(nodes)),densify=False)

    @classmethod
    def allInOne(cls,nodes):
        nodes = list(nodes)
        return cls(nodes,np.zeros(len(nodes),dtype=np.int64),densify=False)

    @classmethod
    def load(cls,filename):
        """Read a partition CSV (zone_id,region_id).

        :param filename:
          Partition CSV file; lines starting with '#' are ignored.
        :returns:
          Partition instance, labels densified in zone order.
        :raises RegionFlowException:
          When columns are missing or a zone repeats.
        """
        df = pd.read_csv(filename,dtype={'zone_id':str},keep_default_na=False,comment='#')
        for col in ['zone_id','region_id']:
            if col not in df.columns:
                raise RegionFlowException('Partition file %s is missing column %s.' % (filename,col),
                                          code='malformed_header')
        if df['zone_id'].duplicated().any():
            raise RegionFlowException('Partition file %s repeats zone ids.' % filename,
                                      code='malformed_record')
        df = df.sort_values('zone_id')
        labels = pd.factorize(df['region_id'].astype(str))[0]
        return cls(df['zone_id'].tolist(),labels)

    #"magic" methods
    def __len__(self):
        return len(self._nodes)

    def __eq__(self,other):
        if not isinstance(other,Partition):
            return False
        return self._nodes == other._nodes and np.array_equal(self._labels,other._labels)

    def __repr__(self):
        return 'Partition(%i nodes, %i communities)' % (len(self._nodes),self.getCommunityCount())

    def getNodes(self):
        return list(self._nodes)

    def getLabels(self):
        """Return a copy of the label array (node order).
        """
        return self._labels.copy()

    def getLabel(self,node):
        if node not in self._index:
            raise RegionFlowException('Node "%s" is not in the partition.' % str(node),
                                      code='coverage_mismatch',details={'zones':[str(node)]})
        return int(self._labels[self._index[node]])

    def hasNode(self,node):
        return node in self._index

    def getLabelsFor(self,nodes):
        """Return the labels of a sequence of nodes as a numpy array.

        :raises RegionFlowException:
          When any node is missing from the partition (details list them).
        """
        missing = [node for node in nodes if node not in self._index]
        if len(missing):
            raise RegionFlowException('%i node(s) missing from partition, first is "%s".' %
                                      (len(missing),str(missing[0])),
                                      code='coverage_mismatch',details={'zones':[str(z) for z in missing]})
        return np.array([self._labels[self._index[node]] for node in nodes],dtype=np.int64)

    def getCommunityCount(self):
        if not len(self._labels):
            return 0
        return int(self._labels.max()) + 1

    def getCommunities(self):
        """Return a list of node lists, one per community label.
        """
        communities = [[] for i in range(self.getCommunityCount())]
        for node,label in zip(self._nodes,self._labels):
            communities[label].append(node)
        return communities

    def asDict(self):
        return OrderedDict([(node,int(label)) for node,label in zip(self._nodes,self._labels)])

    def sameStructure(self,other):
        """Return True when both partitions group the same nodes together (labels may differ).
        """
        if set(self._nodes) != set(other.getNodes()):
            return False
        mine = set([frozenset(c) for c in self.getCommunities()])
        theirs = set([frozenset(c) for c in other.getCommunities()])
        return mine == theirs

    def getDataFrame(self):
        """Return the partition as a DataFrame (zone_id,region_id) sorted by zone_id.
        """
        df = pd.DataFrame({'zone_id':self._nodes,'region_id':self._labels})
        return df.sort_values('zone_id').reset_index(drop=True)

    def save(self,filename,comment=None):
        saveFrame(self.getDataFrame(),filename,comment=comment)

class LouvainOptions(object):
    """Settings for the Louvain optimizer.
    """
    def __init__(self,order=ORDER_SORTED,seed=None,min_gain=1e-9,max_levels=None):
        """
        :param order:
          Node visit order, 'sorted' (ascending node id) or 'shuffle' (seeded permutation).
        :param seed:
          Integer seed, required for 'shuffle'.  Recorded but unused for 'sorted'.
        :param min_gain:
          Minimum improvement of overall modularity for a level to be recorded.
        :param max_levels:
          Optional cap on the number of recorded levels.
        :raises RegionFlowException:
          On an unknown order, a shuffle without seed, or nonpositive min_gain.
        """
        if order not in (ORDER_SORTED,ORDER_SHUFFLE):
            raise RegionFlowException('Unknown node order "%s".' % order,code='config')
        if order == ORDER_SHUFFLE and seed is None:
            raise RegionFlowException('A seed is required for the shuffle node order.',code='config')
        if not min_gain > 0:
            raise RegionFlowException('min_gain must be positive.',code='config')
        if max_levels is not None and max_levels < 1:
            raise RegionFlowException('max_levels must be at least 1.',code='config')
        self.order = order
        self.seed = seed
        self.min_gain = float(min_gain)
        self.max_levels = max_levels

    def getOrder(self,n,level=0):
        """Return the node visit sequence for one phase-one run.

        :param n:
          Number of nodes.
        :param level:
          Level index, mixed into the seed so every level draws its own permutation.
        """
        if self.order == ORDER_SORTED:
            return list(range(n))
        rng = np.random.default_rng([int(self.seed),int(level)])
        return [int(i) for i in rng.permutation(n)]

    def asDict(self):
        return OrderedDict([('order',self.order),('seed',self.seed),
                            ('min_gain',self.min_gain),('max_levels',self.max_levels)])

class CommunityState(object):
    """
    Community sums used for incremental modularity gains.

    For every community c, sigma_in[c] is the sum of A_ij over i,j in c (each
    distinct-pair edge counted twice, A_ii = 2w for self-loops) and
    sigma_tot[c] is the sum of member degrees.  Then
    Q = sum_c sigma_in[c]/2m - (sigma_tot[c]/2m)^2.
    """
    def __init__(self,net,partition=None):
        """
        :param net:
          FlowNetwork instance with m > 0.
        :param partition:
          Optional starting Partition of net's nodes; defaults to singletons.
        """
        self._nodes = net.getNodes()
        self._index = dict([(node,i) for i,node in enumerate(self._nodes)])
        self._neighbors,self._loops = net.getNeighbors()
        self._degrees = [float(k) for k in net.getDegrees()]
        self._m = net.getTotalWeight()
        if not self._m > 0:
            raise RegionFlowException('Network has no edge weight.',code='empty_input')
        n = len(self._nodes)
        if partition is None:
            comm = list(range(n))
        else:
            comm = [int(c) for c in partition.getLabelsFor(self._nodes)]
        size = max([n] + [c+1 for c in comm])
        self._comm = comm
        self._source = list(comm)
        self._tot = [0.0]*size
        self._in = [0.0]*size
        for i in range(n):
            c = comm[i]
            self._tot[c] += self._degrees[i]
            self._in[c] += self._loops[i] + sum([w for j,w in self._neighbors[i] if comm[j] == c])

    def _nodeIndex(self,node):
        if node not in self._index:
            raise RegionFlowException('Node "%s" is not in the network.' % str(node))
        return self._index[node]

    def _checkLabel(self,label):
        if label < 0 or label >= len(self._tot):
            raise RegionFlowException('Unknown community label %s.' % str(label))

    def _neighborWeights(self,i):
        """Return a dict of community -> total edge weight from node i (distinct pairs, counted once).
        """
        weights = {}
        comm = self._comm
        for j,w in self._neighbors[i]:
            c = comm[j]
            if c < 0:
                continue
            weights[c] = weights.get(c,0.0) + w
        return weights

    def _remove(self,i,kin):
        c = self._comm[i]
        self._tot[c] -= self._degrees[i]
        self._in[c] -= 2.0*kin + self._loops[i]
        self._source[i] = c
        self._comm[i] = -1

    def _insert(self,i,c,kin):
        self._tot[c] += self._degrees[i]
        self._in[c] += 2.0*kin + self._loops[i]
        self._comm[i] = c

    def _insertionGain(self,i,tot,kin):
        #modularity change of moving detached node i from its own singleton into a community
        m = self._m
        return kin/m - tot*self._degrees[i]/(2.0*m*m)

    def getCommunity(self,node):
        """Return the community of a node, or -1 when it is detached.
        """
        return self._comm[self._nodeIndex(node)]

    def getSigmaIn(self,label):
        self._checkLabel(label)
        return self._in[label]

    def getSigmaTot(self,label):
        self._checkLabel(label)
        return self._tot[label]

    def getTotalWeight(self):
        return self._m

    def remove(self,node):
        """Detach a node from its community (its source community is remembered).
        """
        i = self._nodeIndex(node)
        if self._comm[i] < 0:
            raise RegionFlowException('Node "%s" is already detached.' % str(node))
        self._remove(i,self._neighborWeights(i).get(self._comm[i],0.0))

    def insert(self,node,label):
        """Attach a detached node to a community.
        """
        i = self._nodeIndex(node)
        self._checkLabel(label)
        if self._comm[i] >= 0:
            raise RegionFlowException('Node "%s" is not detached.' % str(node))
        self._insert(i,label,self._neighborWeights(i).get(label,0.0))

    def moveNode(self,node,label):
        """Move a node (attached or detached) into a community.
        """
        i = self._nodeIndex(node)
        self._checkLabel(label)
        if self._comm[i] >= 0:
            self._remove(i,self._neighborWeights(i).get(self._comm[i],0.0))
        self._insert(i,label,self._neighborWeights(i).get(label,0.0))

    def moveGain(self,node,target):
        """Return the exact modularity change of moving a node into the target community.

        The gain is that of inserting the node into the target minus that of
        inserting it back into its source community.  For a detached node the
        source is the community it was removed from.

        :param node:
          Node id.
        :param target:
          Community label.
        :returns:
          Change of modularity, Q_after - Q_before.
        :raises RegionFlowException:
          When the target label is unknown.
        """
        i = self._nodeIndex(node)
        self._checkLabel(target)
        weights = self._neighborWeights(i)
        ki = self._degrees[i]
        if self._comm[i] >= 0:
            source = self._comm[i]
            if target == source:
                return 0.0
            stot = self._tot[source] - ki
        else:
            source = self._source[i]
            if target == source:
                return 0.0
            stot = self._tot[source]
        ttot = self._tot[target]
        return (self._insertionGain(i,ttot,weights.get(target,0.0)) -
                self._insertionGain(i,stot,weights.get(source,0.0)))

    def optimizeNode(self,i):
        """Move the node at position i to its best neighboring community.

        The node moves only for a strictly positive gain over staying in its
        own community; equal gains go to the smallest label.

        :param i:
          Node position in the network's node list.
        :returns:
          True when the node changed community.
        """
        source = self._comm[i]
        if source < 0:
            raise RegionFlowException('Node "%s" is detached.' % str(self._nodes[i]))
        weights = self._neighborWeights(i)
        self._remove(i,weights.get(source,0.0))
        basegain = self._insertionGain(i,self._tot[source],weights.get(source,0.0))
        best = source
        bestgain = None
        for c in sorted(weights):
            if c == source:
                continue
            gain = self._insertionGain(i,self._tot[c],weights[c])
            if bestgain is None or gain > bestgain:
                best = c
                bestgain = gain
        if bestgain is not None and bestgain - basegain > 0:
            self._insert(i,best,weights[best])
            return True
        self._insert(i,source,weights.get(source,0.0))
        return False

    def modularity(self):
        """Return Q from the community sums (detached nodes must be reinserted first).
        """
        twom = 2.0*self._m
        q = 0.0
        for sin,stot in zip(self._in,self._tot):
            q += sin/twom - (stot/twom)**2
        return q

    def getPartition(self):
        """Return the current assignment as a densified Partition.
        """
        if min(self._comm) < 0:
            raise RegionFlowException('Cannot build a partition while nodes are detached.')
        return Partition(self._nodes,self._comm)

def _checkNetwork(net):
    if not len(net) or not net.getTotalWeight() > 0:
        raise RegionFlowException('Network is empty or carries no flow.',code='empty_input')

def modularity(net,p):
    """Compute the weighted modularity Q of a partition.

    Q = (1/2m) sum_ij (A_ij - k_i k_j / 2m) delta(c_i,c_j), evaluated from per-community
    sums as sum_c sigma_in/2m - (sigma_tot/2m)^2.

    :param net:
      FlowNetwork instance.
    :param p:
      Partition covering exactly the network's nodes.
    :returns:
      Modularity Q.
    :raises RegionFlowException:
      When the network is empty or the partition does not cover its nodes.
    """
    _checkNetwork(net)
    nodes = net.getNodes()
    if len(p) != len(nodes):
        extra = sorted(set(p.getNodes()) - set(nodes),key=str)
        if len(extra):
            raise RegionFlowException('Partition holds %i node(s) not in the network.' % len(extra),
                                      code='coverage_mismatch',details={'zones':[str(z) for z in extra]})
    labels = p.getLabelsFor(nodes)
    ncomm = int(labels.max()) + 1
    matrix = net.getMatrix().tocoo()
    same = labels[matrix.row] == labels[matrix.col]
    sigma_in = np.bincount(labels[matrix.row[same]],weights=matrix.data[same],minlength=ncomm)
    sigma_tot = np.bincount(labels,weights=net.getDegrees(),minlength=ncomm)
    twom = 2.0*net.getTotalWeight()
    return float(np.sum(sigma_in/twom) - np.sum((sigma_tot/twom)**2))

def moveGain(state,node,target):
    """Return the exact modularity change of moving node into community target.

    See CommunityState.moveGain.
    """
    return state.moveGain(node,target)

def phaseOne(net,options=None,level=0):
    """Local moving phase of the Louvain method.

    Starting from singletons, nodes are visited in the configured order; each
    node moves to the neighboring community with the largest strictly
    positive modularity gain (ties go to the smallest label).  Sweeps repeat
    until a full sweep moves nothing.

    :param net:
      FlowNetwork with m > 0.
    :param options:
      LouvainOptions, or None for defaults.
    :param level:
      Level index, used to draw the shuffle order.
    :returns:
      Densified Partition of the network's nodes.
    """
    _checkNetwork(net)
    if options is None:
        options = LouvainOptions()
    state = CommunityState(net)
    order = options.getOrder(len(net),level=level)
    nsweeps = 0
    while True:
        moves = 0
        for i in order:
            if state.optimizeNode(i):
                moves += 1
        nsweeps += 1
        if not moves:
            break
        if nsweeps >= MAX_SWEEPS:
            warnings.warn(RegionFlowWarning('Local moving stopped after %i sweeps.' % nsweeps))
            break
    logger.debug('Phase one finished after %i sweeps' % nsweeps)
    return state.getPartition()

def aggregate(net,p):
    """Collapse each community into a super-node.

    Crossing edge weights are summed into super-node edges and all weight
    inside a community (old self-loops included) becomes a self-loop, so m is
    preserved and super-node degrees equal the communities' sigma_tot.

    :param net:
      FlowNetwork instance.
    :param p:
      Partition of the network's nodes.
    :returns:
      FlowNetwork whose node ids are the community labels 0..C-1.
    """
    labels = p.getLabelsFor(net.getNodes())
    n = len(labels)
    ncomm = int(labels.max()) + 1 if n else 0
    indicator = sparse.csr_matrix((np.ones(n),(np.arange(n),labels)),shape=(n,ncomm))
    collapsed = (indicator.T @ net.getMatrix() @ indicator).tocsr()
    collapsed = (collapsed + collapsed.T)/2.0
    return FlowNetwork(list(range(ncomm)),collapsed)

class DendrogramLevel(object):
    """One recorded level of the Louvain hierarchy.
    """
    def __init__(self,network,partition,q,zonepartition):
        """
        :param network:
          FlowNetwork the level was computed on (None when loaded from file).
        :param partition:
          Partition of that network's nodes.
        :param q:
          Overall modularity after the level.
        :param zonepartition:
          Composed zone-level Partition.
        """
        self.network = network
        self.partition = partition
        self.q = float(q)
        self.zonepartition = zonepartition

class Dendrogram(object):
    """
    The recorded multi-level Louvain hierarchy.  Level 0 partitions the
    original zones; level L partitions the super-nodes of level L-1.
    """
    def __init__(self,zones,levels,baseline=None):
        """
        :param zones:
          List of original zone ids.
        :param levels:
          List of DendrogramLevel objects, finest first.
        :param baseline:
          Modularity of the singleton partition, or None.
        """
        self._zones = list(zones)
        self._levels = list(levels)
        self._baseline = baseline

    def __len__(self):
        return len(self._levels)

    def getZones(self):
        return list(self._zones)

    def getLevelCount(self):
        return len(self._levels)

    def _checkLevel(self,level):
        if level < 0 or level >= len(self._levels):
            raise RegionFlowException('Level %i is out of range (dendrogram has %i levels).' %
                                      (level,len(self._levels)),code='level_out_of_range')

    def getLevel(self,level):
        self._checkLevel(level)
        return self._levels[level]

    def getZonePartition(self,level):
        """Return the composed zone-level partition at a level.
        """
        self._checkLevel(level)
        return self._levels[level].zonepartition

    def getModularity(self,level):
        self._checkLevel(level)
        return self._levels[level].q

    def getCommunityCounts(self):
        """Return the list of community counts, finest level first.
        """
        return [lev.zonepartition.getCommunityCount() for lev in self._levels]

    def getFinalPartition(self):
        """Return the last level's zone partition, or singletons when nothing was recorded.
        """
        if not len(self._levels):
            return Partition.singletons(self._zones)
        return self._levels[-1].zonepartition

    def compose(self,level):
        """Compose the per-level partitions 0..level into a zone-level partition.
        """
        self._checkLevel(level)
        labels = self._levels[0].partition.getLabelsFor(self._zones)
        for lev in self._levels[1:level+1]:
            labels = lev.partition.getLabels()[labels]
        return Partition(self._zones,labels,densify=False)

    def asDict(self,metadata=None):
        levels = []
        for i,lev in enumerate(self._levels):
            assignment = OrderedDict([(str(z),int(l)) for z,l in zip(self._zones,
                                       lev.zonepartition.getLabelsFor(self._zones))])
            levels.append(OrderedDict([('level',i),
                                       ('community_count',lev.zonepartition.getCommunityCount()),
                                       ('Q',lev.q),
                                       ('zone_assignment',assignment)]))
        mydict = OrderedDict()
        mydict['zone_count'] = len(self._zones)
        mydict['zones'] = [str(z) for z in self._zones]
        mydict['levels'] = levels
        mydict['metadata'] = metadata if metadata is not None else {}
        return mydict

    def dumps(self,metadata=None):
        """Serialize to a deterministic JSON string.
        """
        return json.dumps(self.asDict(metadata),sort_keys=True,indent=1) + '\n'

    def save(self,filename,metadata=None):
        with open(filename,'wt') as f:
            f.write(self.dumps(metadata))

    @classmethod
    def load(cls,filename):
        """Read a dendrogram written by save().

        Level networks are not stored; per-level partitions of super-nodes
        are rebuilt from consecutive zone-level partitions.

        :param filename:
          Dendrogram JSON file.
        :returns:
          Dendrogram instance.
        """
        with open(filename,'rt') as f:
            mydict = json.load(f)
        levels = []
        previous = None
        zones = mydict.get('zones')
        for levdict in mydict['levels']:
            zonepart = Partition.fromDict(levdict['zone_assignment'],densify=False)
            if zones is None:
                zones = zonepart.getNodes()
            if previous is None:
                partition = zonepart
            else:
                superlabels = {}
                prev = previous.getLabelsFor(zones)
                cur = zonepart.getLabelsFor(zones)
                for a,b in zip(prev,cur):
                    superlabels[int(a)] = int(b)
                nsuper = previous.getCommunityCount()
                partition = Partition(list(range(nsuper)),[superlabels[s] for s in range(nsuper)],densify=False)
            levels.append(DendrogramLevel(None,partition,levdict['Q'],zonepart))
            previous = zonepart
        if zones is None:
            zones = []
        return cls(zones,levels)

def runLouvain(net,options=None):
    """Run the two-phase Louvain method and record every level.

    Phase one and aggregation alternate.  A level is recorded when phase one
    changed the partition and overall modularity improved by at least
    options.min_gain; the run stops otherwise, after a level with a single
    community, or when max_levels is reached.

    :param net:
      FlowNetwork with m > 0.
    :param options:
      LouvainOptions, or None for defaults.
    :returns:
      Dendrogram instance.
    :raises RegionFlowException:
      When the network is empty.
    """
    _checkNetwork(net)
    if options is None:
        options = LouvainOptions()
    zones = net.getNodes()
    qprev = modularity(net,Partition.singletons(zones))
    baseline = qprev
    current = net
    zonelabels = np.arange(len(zones))
    levels = []
    while True:
        part = phaseOne(current,options,level=len(levels))
        if part.getCommunityCount() == len(current):
            break
        composed = part.getLabelsFor(current.getNodes())[zonelabels]
        zonepart = Partition(zones,composed,densify=False)
        q = modularity(net,zonepart)
        if q - qprev < options.min_gain:
            break
        levels.append(DendrogramLevel(current,part,q,zonepart))
        logger.info('Level %i: %i communities, Q = %.6f' % (len(levels)-1,part.getCommunityCount(),q))
        qprev = q
        if part.getCommunityCount() == 1:
            break
        if options.max_levels is not None and len(levels) >= options.max_levels:
            break
        current = aggregate(current,part)
        zonelabels = zonepart.getLabels()
    return Dendrogram(zones,levels,baseline=baseline)
