#!/usr/bin/env python

#stdlib imports
from collections import OrderedDict
import json
import logging

#third party imports
import networkx as nx
import numpy as np
import pandas as pd

#local imports
from .dataset import RegionFlowException,saveFrame
from .louvain import Partition

logger = logging.getLogger(__name__)

class AdjacencyMap(object):
    """
    Symmetric zone adjacency (zone id -> set of neighboring zone ids).
    """
    def __init__(self,neighbors,zones=None):
        """Construct an AdjacencyMap.

        :param neighbors:
          Dictionary of zone id -> iterable of neighboring zone ids.
        :param zones:
          Optional iterable of additional zone ids; zones without neighbors are islands.
        :raises RegionFlowException:
          When the relation is not symmetric or a zone neighbors itself.
        """
        adj = OrderedDict()
        allzones = set(neighbors.keys())
        for nbrs in neighbors.values():
            allzones |= set(nbrs)
        if zones is not None:
            allzones |= set(zones)
        for zone in sorted(allzones):
            adj[zone] = set()
        for zone,nbrs in neighbors.items():
            for other in nbrs:
                if other == zone:
                    raise RegionFlowException('Zone "%s" cannot neighbor itself.' % str(zone),
                                              code='bad_adjacency')
                adj[zone].add(other)
        for zone,nbrs in adj.items():
            for other in nbrs:
                if zone not in adj[other]:
                    raise RegionFlowException('Adjacency is not symmetric: %s -> %s.' % (zone,other),
                                              code='bad_adjacency')
        self._adj = adj

    @classmethod
    def fromPairs(cls,pairs,zones=None):
        """Create an AdjacencyMap from undirected (zone_a,zone_b) pairs.
        """
        neighbors = {}
        for a,b in pairs:
            if a == b:
                raise RegionFlowException('Zone "%s" cannot neighbor itself.' % str(a),code='bad_adjacency')
            neighbors.setdefault(a,set()).add(b)
            neighbors.setdefault(b,set()).add(a)
        return cls(neighbors,zones=zones)

    @classmethod
    def loadFromCSV(cls,csvfile,zones=None):
        """Load adjacency from a CSV file with one undirected pair per row (zone_a,zone_b).

        :param csvfile:
          Path to adjacency CSV file.
        :param zones:
          Optional zone universe; zones absent from the file become islands.
        :returns:
          AdjacencyMap instance.
        """
        df = pd.read_csv(csvfile,dtype=str,keep_default_na=False,comment='#')
        for col in ['zone_a','zone_b']:
            if col not in df.columns:
                raise RegionFlowException('Adjacency file %s is missing column %s.' % (csvfile,col),
                                          code='malformed_header')
        return cls.fromPairs(zip(df['zone_a'].str.strip(),df['zone_b'].str.strip()),zones=zones)

    def __len__(self):
        return len(self._adj)

    def __eq__(self,other):
        return isinstance(other,AdjacencyMap) and self._adj == other._adj

    def getZones(self):
        return list(self._adj.keys())

    def hasZone(self,zone):
        return zone in self._adj

    def getNeighbors(self,zone):
        """Return the set of neighbors of a zone.

        :raises RegionFlowException:
          When the zone is unknown.
        """
        if zone not in self._adj:
            raise RegionFlowException('Zone "%s" is not in the adjacency map.' % str(zone),
                                      code='coverage_mismatch',details={'zones':[str(zone)]})
        return set(self._adj[zone])

    def isIsland(self,zone):
        return not len(self.getNeighbors(zone))

    def getPairs(self):
        """Return the sorted list of undirected pairs (zone_a < zone_b).
        """
        pairs = []
        for zone,nbrs in self._adj.items():
            for other in nbrs:
                if zone < other:
                    pairs.append((zone,other))
        return sorted(pairs)

    def getGraph(self):
        """Return the adjacency as a networkx Graph (islands included as nodes).
        """
        graph = nx.Graph()
        graph.add_nodes_from(self._adj.keys())
        graph.add_edges_from(self.getPairs())
        return graph

    def isContiguous(self,zones):
        """Return True when the zones form one connected piece of the adjacency graph.
        """
        zones = list(zones)
        if len(zones) <= 1:
            return True
        return nx.is_connected(self.getGraph().subgraph(zones))

    def save(self,filename,comment=None):
        pairs = self.getPairs()
        df = pd.DataFrame({'zone_a':[a for a,b in pairs],'zone_b':[b for a,b in pairs]})
        saveFrame(df,filename,comment=comment)

class BaselineFlags(object):
    """Diagnostics recorded while building the plurality baseline.
    """
    def __init__(self):
        self.seeds = OrderedDict()
        self.ties = []
        self.no_flow = []
        self.islands = []
        self.enclaves = OrderedDict()
        self.unresolved = []

    def asDict(self,metadata=None):
        mydict = OrderedDict()
        mydict['region_seeds'] = OrderedDict([(str(k),v) for k,v in self.seeds.items()])
        mydict['ties'] = sorted(self.ties)
        mydict['no_flow'] = sorted(self.no_flow)
        mydict['islands'] = sorted(self.islands)
        mydict['enclaves_moved'] = self.enclaves
        mydict['unresolved'] = sorted(self.unresolved)
        mydict['metadata'] = metadata if metadata is not None else {}
        return mydict

    def save(self,filename,metadata=None):
        with open(filename,'wt') as f:
            f.write(json.dumps(self.asDict(metadata),sort_keys=True,indent=1) + '\n')

def _hospitalZoneFlows(table,roster):
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
    flows = pd.DataFrame({'patient_zone':df['patient_zone'].values,
                          'hospital_zone':hzones.values,
                          'count':df['count'].values})
    return flows.groupby(['patient_zone','hospital_zone'],sort=True)['count'].sum().reset_index()

def pluralityAssign(table,roster=None,attrs=None,flags=None):
    """Assign every zone to the hospital home zone receiving most of its admissions.

    Hospital home zones seed the regions.  Ties go to the smaller home zone id
    and are flagged.  Zones with no outgoing flow (declared by attrs, or
    hospital zones without residents in the table) go to the hospital home
    zone with the nearest centroid and are flagged 'no_flow'.

    :param table:
      Non-empty FlowTable.
    :param roster:
      HospitalRoster mapping hospitals to home zones (None uses the table's hospital_zone).
    :param attrs:
      Optional ZoneAttributes (zone universe and centroids).
    :param flags:
      Optional BaselineFlags to fill; a new one is created otherwise.
    :returns:
      Tuple of (Partition,BaselineFlags).
    :raises RegionFlowException:
      When the table is empty, or a zero-flow zone has no centroid.
    """
    if table.isEmpty():
        raise RegionFlowException('Cannot build a plurality baseline from an empty flow table.',
                                  code='empty_input')
    if flags is None:
        flags = BaselineFlags()
    flows = _hospitalZoneFlows(table,roster)
    seeds = sorted(set(flows['hospital_zone']))
    ranked = flows.sort_values(['patient_zone','count','hospital_zone'],ascending=[True,False,True])
    top = ranked.groupby('patient_zone',sort=True).head(1)
    maxcount = ranked.groupby('patient_zone',sort=True)['count'].transform('max')
    ntop = (ranked['count'] == maxcount).groupby(ranked['patient_zone']).sum()
    assignment = dict(zip(top['patient_zone'],top['hospital_zone']))
    flags.ties.extend([z for z,n in ntop.items() if n > 1])

    zones = set(flows['patient_zone']) | set(flows['hospital_zone'])
    if attrs is not None:
        zones |= set(attrs.getZones())
    noflow = sorted(zones - set(assignment))
    #a hospital home zone without resident flow is its own nearest seed
    for zone in noflow:
        if zone in seeds:
            assignment[zone] = zone
    remote = [z for z in noflow if z not in assignment]
    if len(remote):
        centroids = attrs.getCentroids() if attrs is not None else {}
        lacking = [z for z in remote + seeds if z not in centroids]
        if len(lacking):
            raise RegionFlowException('Zero-flow zones need centroids; missing for: %s' % str(sorted(set(lacking))),
                                      code='missing_centroid',details={'zones':sorted(set(lacking))})
        seedxy = np.array([centroids[s] for s in seeds],dtype=float)
        for zone in remote:
            x,y = centroids[zone]
            dist = np.hypot(seedxy[:,0]-x,seedxy[:,1]-y)
            #argmin returns the first minimum, i.e. the smallest seed id
            assignment[zone] = seeds[int(np.argmin(dist))]
    flags.no_flow.extend(noflow)

    allzones = sorted(zones)
    seedindex = dict([(s,i) for i,s in enumerate(seeds)])
    seedlabels = [seedindex[assignment[z]] for z in allzones]
    partition = Partition(allzones,seedlabels)
    labels = partition.getLabelsFor(allzones)
    flags.seeds = OrderedDict()
    for zone,label in sorted(zip(allzones,labels),key=lambda t: t[1]):
        if int(label) not in flags.seeds:
            flags.seeds[int(label)] = assignment[zone]
    logger.info('Plurality rule: %i zones in %i regions (%i ties, %i without flow)' %
                (len(allzones),partition.getCommunityCount(),len(flags.ties),len(noflow)))
    return partition,flags

def enforceContiguity(p,adj,table,roster=None,flags=None):
    """Reassign enclave zones so that every region is contiguous.

    For each region the largest connected component (by zone count, ties by
    internal flow, then by smallest zone id) is kept.  Each zone outside it is
    an enclave and moves to the adjacent region that receives the largest
    share of its flows (ties to the smallest region label).  Passes repeat
    until all regions are connected or nothing can move.  Zones with no
    neighbors are islands: they stay put, are flagged, and are ignored by the
    connectivity requirement.

    :param p:
      Zone-level Partition.
    :param adj:
      AdjacencyMap covering every zone of p.
    :param table:
      FlowTable used to rank destination regions.
    :param roster:
      Optional HospitalRoster for hospital home zones.
    :param flags:
      Optional BaselineFlags to fill.
    :returns:
      Tuple of (Partition,BaselineFlags).
    :raises RegionFlowException:
      When adjacency does not cover the partition's zones.
    """
    if flags is None:
        flags = BaselineFlags()
    zones = p.getNodes()
    missing = [z for z in zones if not adj.hasZone(z)]
    if len(missing):
        raise RegionFlowException('Adjacency does not cover %i zone(s), first is "%s".' % (len(missing),missing[0]),
                                  code='coverage_mismatch',details={'zones':missing})
    graph = adj.getGraph()
    labels = dict([(z,int(l)) for z,l in zip(zones,p.getLabelsFor(zones))])
    islands = set([z for z in zones if adj.isIsland(z)])
    flags.islands = sorted(set(flags.islands) | islands)

    flows = _hospitalZoneFlows(table,roster) if not table.isEmpty() else \
        pd.DataFrame({'patient_zone':[],'hospital_zone':[],'count':[]})
    outflows = {}
    for pz,hz,count in zip(flows['patient_zone'],flows['hospital_zone'],flows['count']):
        outflows.setdefault(pz,[]).append((hz,int(count)))

    def internalFlow(component):
        total = 0
        for z in component:
            for hz,count in outflows.get(z,[]):
                if hz in component:
                    total += count
        return total

    def findEnclaves():
        members = {}
        for z in zones:
            if z in islands:
                continue
            members.setdefault(labels[z],[]).append(z)
        enclaves = []
        for label in sorted(members):
            components = [set(c) for c in nx.connected_components(graph.subgraph(members[label]))]
            if len(components) <= 1:
                continue
            #largest zone count, then more internal flow, then the smallest zone id
            components.sort(key=lambda c: (-len(c),-internalFlow(c),min(c)))
            for component in components[1:]:
                enclaves.extend(component)
        return enclaves

    maxpasses = len(zones) + 1
    for npass in range(maxpasses):
        enclaves = findEnclaves()
        if not len(enclaves):
            break
        moved = 0
        for z in sorted(enclaves):
            current = labels[z]
            candidates = sorted(set([labels[n] for n in graph[z]]) - set([current]))
            if not len(candidates):
                continue
            shares = dict([(c,0) for c in candidates])
            for hz,count in outflows.get(z,[]):
                if hz in labels and labels[hz] in shares:
                    shares[labels[hz]] += count
            best = candidates[0]
            for c in candidates[1:]:
                if shares[c] > shares[best]:
                    best = c
            labels[z] = best
            flags.enclaves[str(z)] = OrderedDict([('from',current),('to',best)])
            moved += 1
        logger.info('Contiguity pass %i: %i enclave zone(s), %i moved' % (npass,len(enclaves),moved))
        if not moved:
            flags.unresolved = sorted(set(flags.unresolved) | set(enclaves))
            break
    else:
        remaining = findEnclaves()
        if len(remaining):
            logger.warning('Contiguity not reached after %i passes' % maxpasses)
            flags.unresolved = sorted(set(flags.unresolved) | set(remaining))
    partition = Partition(zones,[labels[z] for z in zones])
    return partition,flags
