#!/usr/bin/env python

#stdlib imports
from collections import OrderedDict
import itertools
import json
import logging

#third party imports
import numpy as np
import pandas as pd

#local imports
from .dataset import RegionFlowException,saveFrame
from .louvain import Partition,aggregate,modularity

PROVENANCE_LEVEL = 'dendrogram-level'
PROVENANCE_MERGE = 'greedy-merge'

logger = logging.getLogger(__name__)

class ScaleCut(object):
    """
    A zone-level partition with exactly k regions.
    """
    def __init__(self,k,partition,q,provenance,level=None):
        """
        :param k:
          Number of regions.
        :param partition:
          Zone-level Partition with k communities.
        :param q:
          Modularity of the partition.
        :param provenance:
          'dendrogram-level' or 'greedy-merge'.
        :param level:
          Index of the dendrogram level the cut equals, or the level merging
          started from (None when merging started from singletons).
        """
        self.k = int(k)
        self.partition = partition
        self.q = float(q)
        self.provenance = provenance
        self.level = level

    def asDict(self):
        return OrderedDict([('k',self.k),('Q',self.q),('provenance',self.provenance),
                            ('level',self.level)])

class _GreedyMerger(object):
    """Agglomerate communities pairwise by largest modularity gain.
    """
    def __init__(self,net,partition):
        self._zones = net.getNodes()
        self._startlabels = partition.getLabelsFor(self._zones)
        collapsed = aggregate(net,partition)
        self._m = collapsed.getTotalWeight()
        neighbors,loops = collapsed.getNeighbors()
        degrees = collapsed.getDegrees()
        n = len(collapsed)
        self._tot = dict([(c,float(degrees[c])) for c in range(n)])
        self._links = dict([(c,dict(neighbors[c])) for c in range(n)])
        self._parent = list(range(n))

    def getCount(self):
        return len(self._tot)

    def _gain(self,a,b,w):
        m = self._m
        return w/m - self._tot[a]*self._tot[b]/(2.0*m*m)

    def _bestPair(self):
        candidates = []
        for a in sorted(self._links):
            for b,w in self._links[a].items():
                if b > a:
                    candidates.append((self._gain(a,b,w),a,b))
        #a community with no weight merges with any other at zero gain
        labels = sorted(self._tot)
        for c in labels:
            if self._tot[c] == 0.0:
                other = labels[1] if labels[0] == c else labels[0]
                candidates.append((0.0,min(c,other),max(c,other)))
        if not len(candidates):
            #no connected pair left: take the least negative gain among all pairs
            candidates = [(self._gain(a,b,0.0),a,b) for a,b in itertools.combinations(labels,2)]
        gain,a,b = max(candidates,key=lambda t: (t[0],-t[1],-t[2]))
        return a,b

    def mergeOnce(self):
        a,b = self._bestPair()
        self._tot[a] += self._tot.pop(b)
        blinks = self._links.pop(b)
        for c,w in blinks.items():
            if c == a:
                continue
            self._links[a][c] = self._links[a].get(c,0.0) + w
            self._links[c][a] = self._links[c].get(a,0.0) + w
            del self._links[c][b]
        self._links[a].pop(b,None)
        self._parent[b] = a

    def _root(self,c):
        while self._parent[c] != c:
            c = self._parent[c]
        return c

    def getPartition(self):
        roots = [self._root(c) for c in range(len(self._parent))]
        labels = np.array([roots[c] for c in self._startlabels],dtype=np.int64)
        return Partition(self._zones,labels)

def cutAtLevel(d,level):
    """Return the composed zone-level partition at a dendrogram level.

    :param d:
      Dendrogram instance.
    :param level:
      Level index, 0 <= level < level count.
    :raises RegionFlowException:
      When the level is out of range.
    """
    return d.getZonePartition(level)

def _startFor(net,d,k):
    """Return (level index or None, partition) where merging toward k starts.

    The start is the recorded level with the fewest communities that still has
    at least k of them; singletons when no level qualifies.
    """
    start = None
    for i,count in enumerate(d.getCommunityCounts()):
        if count >= k:
            if start is None or count < d.getZonePartition(start).getCommunityCount():
                start = i
    if start is None:
        return None,Partition.singletons(net.getNodes())
    return start,d.getZonePartition(start)

def _checkK(net,k,name='k'):
    n = len(net)
    if int(k) != k or k < 1 or k > n:
        raise RegionFlowException('%s = %s is out of range [1,%i].' % (name,str(k),n),
                                  code='k_out_of_range',details={'k':k,'zone_count':n})

def cutToK(net,d,k):
    """Return a partition with exactly k regions.

    If a recorded level has exactly k communities it is returned.  Otherwise
    merging starts from the level with the fewest communities that is still
    >= k (singletons if none), and the connected pair of communities with the
    largest modularity gain is merged until k remain; ties go to the smallest
    (label_a,label_b) pair.  A community with no flow weight pairs with any
    other at zero gain.  With neither kind of candidate left, the pair with
    the least negative gain is merged.

    :param net:
      FlowNetwork the dendrogram was computed on.
    :param d:
      Dendrogram instance.
    :param k:
      Target region count, 1 <= k <= zone count.
    :returns:
      ScaleCut instance.
    :raises RegionFlowException:
      When k is out of range.
    """
    _checkK(net,k)
    level,start = _startFor(net,d,k)
    if level is not None and start.getCommunityCount() == k:
        return ScaleCut(k,start,modularity(net,start),PROVENANCE_LEVEL,level=level)
    merger = _GreedyMerger(net,start)
    while merger.getCount() > k:
        merger.mergeOnce()
    partition = merger.getPartition()
    return ScaleCut(k,partition,modularity(net,partition),PROVENANCE_MERGE,level=level)

class ModularityCurve(object):
    """
    Modularity of the exact-k cuts over a range of k.
    """
    def __init__(self,cuts):
        """
        :param cuts:
          List of ScaleCut objects.
        """
        self._cuts = OrderedDict([(cut.k,cut) for cut in sorted(cuts,key=lambda c: c.k)])

    def __len__(self):
        return len(self._cuts)

    def getPoints(self):
        """Return the list of (k,Q) pairs in ascending k.
        """
        return [(k,cut.q) for k,cut in self._cuts.items()]

    def getCut(self,k):
        if k not in self._cuts:
            raise RegionFlowException('k = %s is not on the curve.' % str(k),code='k_out_of_range')
        return self._cuts[k]

    def getBestK(self):
        """Return the k with the largest modularity (smallest k on ties).
        """
        best = None
        for k,cut in self._cuts.items():
            if best is None or cut.q > self._cuts[best].q:
                best = k
        return best

    def getTable(self):
        """Return a DataFrame with columns k, Q, provenance.
        """
        return pd.DataFrame({'k':list(self._cuts.keys()),
                             'Q':[cut.q for cut in self._cuts.values()],
                             'provenance':[cut.provenance for cut in self._cuts.values()]})

    def asDict(self,metadata=None):
        mydict = OrderedDict()
        mydict['best_k'] = self.getBestK()
        mydict['best_Q'] = self._cuts[mydict['best_k']].q
        mydict['points'] = [OrderedDict([('k',k),('Q',q)]) for k,q in self.getPoints()]
        mydict['metadata'] = metadata if metadata is not None else {}
        return mydict

    def save(self,filename,format='csv',metadata=None,comment=None):
        """Write the curve as CSV (k,Q) or JSON.

        :param filename:
          Output file name.
        :param format:
          'csv' or 'json'.
        :param metadata:
          Dictionary embedded in JSON output.
        :param comment:
          Comment line for CSV output.
        """
        if format == 'json':
            with open(filename,'wt') as f:
                f.write(json.dumps(self.asDict(metadata),sort_keys=True,indent=1) + '\n')
        elif format == 'csv':
            saveFrame(self.getTable()[['k','Q']],filename,comment=comment)
        else:
            raise RegionFlowException('Unsupported curve format "%s".' % format,code='config')

def modularityCurve(net,d,kmin,kmax):
    """Trace modularity against region count for k in [kmin,kmax].

    Every point equals cutToK(net,d,k); values of k sharing a starting level
    are produced by one merge sequence with a snapshot at each k.

    :param net:
      FlowNetwork the dendrogram was computed on.
    :param d:
      Dendrogram instance.
    :param kmin:
      Smallest region count.
    :param kmax:
      Largest region count.
    :returns:
      ModularityCurve instance.
    :raises RegionFlowException:
      When the range is invalid.
    """
    _checkK(net,kmin,'k_min')
    _checkK(net,kmax,'k_max')
    if kmin > kmax:
        raise RegionFlowException('k_min = %i exceeds k_max = %i.' % (kmin,kmax),code='k_out_of_range')
    groups = OrderedDict()
    for k in range(kmax,kmin-1,-1):
        level,start = _startFor(net,d,k)
        groups.setdefault(level,(start,[]))[1].append(k)
    cuts = []
    for level,(start,ks) in groups.items():
        if level is not None and start.getCommunityCount() in ks:
            cuts.append(ScaleCut(start.getCommunityCount(),start,modularity(net,start),
                                 PROVENANCE_LEVEL,level=level))
        merger = _GreedyMerger(net,start)
        for k in ks:
            if level is not None and k == start.getCommunityCount():
                continue
            while merger.getCount() > k:
                merger.mergeOnce()
            partition = merger.getPartition()
            cuts.append(ScaleCut(k,partition,modularity(net,partition),PROVENANCE_MERGE,level=level))
    curve = ModularityCurve(cuts)
    logger.info('Modularity curve over k = %i..%i peaks at k = %i' % (kmin,kmax,curve.getBestK()))
    return curve
